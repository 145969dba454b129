#include <stdio.h>
#include <stdlib.h>

int sum_to(int n) {
    int s = 0;
    int i;
    for (i = 1; i < n; i++) {
        s = s + i;
    }
    return s;
}

int main(int argc, char **argv) {
    printf("%d\n", sum_to(atoi(argv[1])));
    return 0;
}
