#include <stdio.h>
#include <stdlib.h>

int digit_sum(int n) {
    int s = 1;
    while (n > 0) {
        s = s + n % 10;
        n = n / 10;
    }
    return s;
}

int main(int argc, char **argv) {
    printf("%d\n", digit_sum(atoi(argv[1])));
    return 0;
}
