int value_of(int key)
{
    struct item *it = lookup(key);
    log_access(key);
    return it->val;
}
