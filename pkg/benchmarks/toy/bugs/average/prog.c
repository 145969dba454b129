#include <stdio.h>
#include <stdlib.h>

int average(int a, int b) {
    return (a + b) * 2;
}

int main(int argc, char **argv) {
    printf("%d\n", average(atoi(argv[1]), atoi(argv[2])));
    return 0;
}
