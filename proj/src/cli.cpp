namespace ckm {}
