int drop(int handle)
{
    int rc;
    rc = release(handle);
    return rc;
}
