#include <stdio.h>
#include <stdlib.h>

double mean(int sum, int n) {
    return sum / n;
}

int main(int argc, char **argv) {
    printf("%.2f\n", mean(atoi(argv[1]), atoi(argv[2])));
    return 0;
}
