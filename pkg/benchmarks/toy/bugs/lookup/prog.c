#include <stdio.h>
#include <stdlib.h>

struct node {
    int key;
    int value;
};

struct node table[3];

struct node *find(int key) {
    int i;
    for (i = 0; i < 3; i++) {
        if (table[i].key == key)
            return &table[i];
    }
    return NULL;
}

int lookup(int key) {
    struct node *p = find(key);
    return p->value;
}

int main(int argc, char **argv) {
    table[0].key = 1;
    table[0].value = 10;
    table[1].key = 2;
    table[1].value = 20;
    table[2].key = 3;
    table[2].value = 30;
    printf("%d\n", lookup(atoi(argv[1])));
    return 0;
}
