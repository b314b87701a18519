#include <stdio.h>
#include "util.h"

int main(void)
{
    int rows[4] = {3, 1, 4, 1};
    int total = checksum(rows, 4);
    struct record rec = make_record(total);
    print_record(&rec);
    if (total != table_size)
        printf("total %d differs from table size %d\n", total, table_size);
    return 0;
}
