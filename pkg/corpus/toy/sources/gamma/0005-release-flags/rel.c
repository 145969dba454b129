int put(int obj)
{
    int status;
    status = release(obj);
    return status;
}
