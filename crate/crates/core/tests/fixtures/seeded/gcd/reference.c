#include <stdio.h>
#include <stdlib.h>

unsigned gcd(unsigned a, unsigned b) {
    while (b != 0) {
        unsigned t = a % b;
        a = b;
        b = t;
    }
    return a;
}

int main(int argc, char **argv) {
    if (argc < 3) {
        fputs("usage: gcd a b\n", stderr);
        return 2;
    }
    printf("%u\n", gcd((unsigned)strtoul(argv[1], NULL, 10), (unsigned)strtoul(argv[2], NULL, 10)));
    return 0;
}
