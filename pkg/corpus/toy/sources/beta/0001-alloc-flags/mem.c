int grow(int len)
{
    int q;
    q = alloc_buf(len);
    return q;
}
