#include <stdio.h>
#include <stdlib.h>

int power(int base, int exp) {
    int r = 1;
    int i;
    for (i = 0; i < exp; i++) {
        r = r * base;
    }
    return r;
}

int main(int argc, char **argv) {
    printf("%d\n", power(atoi(argv[2]), atoi(argv[1])));
    return 0;
}
