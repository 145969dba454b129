int accumulate(int *v, int len)
{
    int i;
    int s = 0;
    for (i = 0; i < len; i++) {
        s = s + v[i];
    }
    return s;
}
