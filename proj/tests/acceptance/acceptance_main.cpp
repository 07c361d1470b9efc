#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::printf("acceptance suite placeholder\n");
  return 1;
}
