int scale(int x)
{
    int y = x * 3;
    return y;
}
