#ifndef UTIL_H
#define UTIL_H

struct record {
    int id;
    int value;
};

extern int table_size;

int checksum(const int *values, int count);
struct record make_record(int value);
void print_record(const struct record *rec);

#endif
