int weight(int k)
{
    struct item *node = lookup(k);
    log_access(k);
    return node->val;
}
