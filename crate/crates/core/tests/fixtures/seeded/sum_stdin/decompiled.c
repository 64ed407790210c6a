undefined8 main(void)

{
  int iVar1;
  long local_18;
  uint local_10;
  undefined4 local_c;
  
  local_18 = 0;
  local_10 = 0;
  while( true ) {
    iVar1 = __isoc99_scanf("%d",&local_c);
    if (iVar1 != 1) break;
    local_18 = local_18 + (int)local_c;
    local_10 = local_10 + 1;
  }
  printf("count=%d sum=%ld\n",(ulong)local_10,local_18);
  return 0;
}
