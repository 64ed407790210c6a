
/* WARNING: Unknown calling convention -- yet parameter storage is locked */

undefined8 main(int param_1,long param_2)

{
  int iVar1;
  int iVar2;
  int local_18 [4];
  
  if (param_1 < 5) {
    return 1;
  }
  iVar1 = atoi(*(char **)(param_2 + 8));
  local_18[0] = iVar1;
  local_18[1] = atoi(*(char **)(param_2 + 0x10));
  local_18[2] = atoi(*(char **)(param_2 + 0x18));
  iVar2 = atoi(*(char **)(param_2 + 0x20));
  local_18[3] = iVar2;
  if (local_18[1] < iVar1) {
    local_18[0] = local_18[1];
    local_18[1] = iVar1;
  }
  if (iVar2 < local_18[2]) {
    local_18[3] = local_18[2];
    local_18[2] = iVar2;
  }
  printf("%d %d %d %d\n",(ulong)(uint)local_18[0],(ulong)(uint)local_18[1],(ulong)(uint)local_18[2],
         (ulong)(uint)local_18[3]);
  return 0;
}

