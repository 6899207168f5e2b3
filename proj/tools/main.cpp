#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "derprop/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Similarity matrices are M x M; keep freed blocks in the heap instead of
  // returning them to the OS after every step.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  std::vector<std::string> args(argv, argv + argc);
  return derprop::cli_dispatch(args, std::cout, std::cerr);
}
