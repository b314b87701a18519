/* A generated file. Edits will be lost on regeneration. */

static int yystate;
static int yyval;

int yyrun(int token)
{
    yyval = yy_reduce(yystate, token);
    return yyval;
}
