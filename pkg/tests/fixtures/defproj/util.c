#include <stdio.h>
#include "util.h"

int table_size = 9;

static int next_id = 1;

int checksum(const int *values, int count)
{
    int total = 0;
    for (int i = 0; i < count; i++)
        total += values[i];
    return total;
}

struct record make_record(int value)
{
    struct record rec;
    rec.id = next_id++;
    rec.value = value;
    return rec;
}

void print_record(const struct record *rec)
{
    printf("record %d: %d\n", rec->id, rec->value);
}
