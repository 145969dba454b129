int total(int *v, int count)
{
    int i;
    int s = 0;
    for (i = 0; i < count; i++) {
        s = s + v[i];
    }
    return s;
}
