#include <stdio.h>
#include <stdlib.h>

int max2(int a, int b) {
    if (a < b)
        return a;
    return b;
}

int main(int argc, char **argv) {
    printf("%d\n", max2(atoi(argv[1]), atoi(argv[2])));
    return 0;
}
