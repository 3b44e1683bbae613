// Solve the Gaussian-source Helmholtz problem at k = 10 on 4 subdomains with the one-level
// method and each spectral coarse space, one CSV row per method.

#include "helmdd/bench.hpp"

#include <iostream>

int main() {
  using namespace helmdd;
  RunConfig c;
  c.k = 10.0;
  c.N = 4;
  write_run_header(std::cout);
  for (Method m : {Method::one_level, Method::delta, Method::delta_k, Method::hk}) {
    c.method = m;
    write_run_row(std::cout, run_single(c));
  }
}
