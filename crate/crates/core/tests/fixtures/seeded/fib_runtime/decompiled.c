void _start(void)

{
  __libc_start_main(main,0,0,0,0,0,0);
  do {
                    /* WARNING: Do nothing block with infinite loop */
  } while( true );
}



int main(int param_1,char **param_2)

{
  long lVar1;
  int local_20;
  unsigned long local_18;
  unsigned long local_10;
  int local_1c;
  
  if (param_1 < 2) {
    local_1c = 10;
  }
  else {
    local_1c = atoi(param_2[1]);
  }
  local_18 = 0;
  local_10 = 1;
  for (local_20 = 0; local_20 < local_1c; local_20 = local_20 + 1) {
    lVar1 = local_18 + local_10;
    local_18 = local_10;
    local_10 = lVar1;
  }
  printf("fib(%d) = %lu\n",local_1c,local_18);
  return 0;
}
