uint gcd(uint param_1,uint param_2)

{
  uint local_1c;
  uint local_18;
  undefined4 local_c;
  
  local_18 = param_2;
  local_1c = param_1;
  while (local_18 != 0) {
    local_c = local_1c % local_18;
    local_1c = local_18;
    local_18 = local_c;
  }
  return local_1c;
}



undefined8 main(int param_1,undefined8 *param_2)

{
  undefined8 uVar1;
  uint uVar2;
  ulong uVar3;
  
  if (param_1 < 3) {
    fwrite("usage: gcd a b\n",1,0xf,stderr);
    uVar1 = 2;
  }
  else {
    uVar3 = strtoul((char *)param_2[2],(char **)0x0,10);
    uVar2 = (uint)uVar3;
    uVar3 = strtoul((char *)param_2[1],(char **)0x0,10);
    uVar2 = gcd((uint)uVar3,uVar2);
    printf("%u\n",(ulong)uVar2);
    uVar1 = 0;
  }
  return uVar1;
}
