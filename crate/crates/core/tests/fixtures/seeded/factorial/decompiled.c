/* WARNING: Unknown calling convention -- yet parameter storage is locked */

undefined8 main(int param_1,long param_2)

{
  int iVar1;
  uint local_c;
  
  if (param_1 < 2) {
    iVar1 = 5;
  }
  else {
    iVar1 = atoi(*(char **)(param_2 + 8));
  }
  local_c = FUN_001011e9(iVar1);
  printf("%d\n",(ulong)local_c);
  return 0;
}
