int make_buf(int size)
{
    int p;
    p = alloc_buf(size);
    return p;
}
