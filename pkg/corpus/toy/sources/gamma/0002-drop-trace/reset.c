void reset(int *v)
{
    v[0] = 0;
    trace(v);
    v[1] = 0;
}
