#include <iostream>
int main() { std::cout << "intrasum\n"; return 0; }
