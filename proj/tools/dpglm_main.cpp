#include "dpglm/dpglm.hpp"
int main() { return 0; }
