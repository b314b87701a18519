/* Fails a hand-rolled length check and aborts.
 *
 * Prints the same message shape as a libc assert so the abort-plus-message
 * detection sees realistic input, then raises SIGABRT.  The stop lands in
 * libc's kill path, leaving several library frames above user code.
 */
#include <stdio.h>
#include <stdlib.h>

static int expected = 10;

static int check_len(int len, int n)
{
    int slack = n - len;
    if (len != n) {
        fprintf(stderr, "Assertion failed: len == n\n");
        fflush(stderr);
        abort();
    }
    return slack;
}

static int validate(int got)
{
    int want = expected;
    return check_len(got, want);
}

int main(void)
{
    printf("checking lengths\n");
    fflush(stdout);
    return validate(7);
}
