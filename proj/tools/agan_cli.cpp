#include "agan/tensor.hpp"
int main(){return 0;}
