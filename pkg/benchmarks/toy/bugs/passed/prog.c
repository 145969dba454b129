#include <stdio.h>
#include <stdlib.h>

int passed(int score) {
    if (score > 50)
        return 1;
    return 0;
}

int main(int argc, char **argv) {
    printf("%d\n", passed(atoi(argv[1])));
    return 0;
}
