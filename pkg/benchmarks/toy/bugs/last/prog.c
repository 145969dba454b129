#include <stdio.h>
#include <stdlib.h>

int last(int *a, int n) {
    return a[n];
}

int main(int argc, char **argv) {
    int a[8];
    int i;
    for (i = 0; i < argc - 1; i++) {
        a[i] = atoi(argv[i + 1]);
    }
    a[argc - 1] = -77;
    printf("%d\n", last(a, argc - 1));
    return 0;
}
