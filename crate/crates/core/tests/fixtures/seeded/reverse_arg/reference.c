#include <stdio.h>
#include <string.h>

int main(int argc, char **argv) {
    const char *s = argc > 1 ? argv[1] : "";
    size_t n = strlen(s);
    for (size_t i = n; i > 0; i--)
        putchar(s[i - 1]);
    putchar('\n');
    printf("%zu\n", n);
    return 0;
}
