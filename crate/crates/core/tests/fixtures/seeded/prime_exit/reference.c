#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
    long n = argc > 1 ? atol(argv[1]) : 0;
    if (n < 2) {
        puts("neither");
        return 2;
    }
    for (long d = 2; d * d <= n; d++) {
        if (n % d == 0) {
            puts("composite");
            return 1;
        }
    }
    puts("prime");
    return 0;
}
