#include <stdio.h>
#include <stdlib.h>

int safe_div(int a, int b) {
    if (b == 0)
        return 0;
    return a / b;
}

int main(int argc, char **argv) {
    printf("%d\n", safe_div(atoi(argv[1]), atoi(argv[2])));
    return 0;
}
