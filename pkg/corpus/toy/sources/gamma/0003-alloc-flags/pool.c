int pool_new(int cap)
{
    int r;
    r = alloc_buf(cap);
    return r;
}
