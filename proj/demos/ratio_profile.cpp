// Ratio profile at one boundary point: a random-phase lacunary field next to the
// non-cancelling control u = w(y). Usage: ratio_profile [WEIGHT] [X] [SEED]

#include <iostream>
#include <string>

#include "blil/experiments.hpp"

int main(int argc, char** argv) {
  using namespace blil;
  const std::string token = argc > 1 ? argv[1] : "w0";
  const double x = argc > 2 ? std::stod(argv[2]) : 1.0;
  const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 1;
  try {
    const auto w = parse_weight(token);
    std::vector<double> levels;
    for (int k = 1; k <= 12; ++k) levels.push_back(std::ldexp(1.0, k));
    const auto lac = lil_ratio_profile_levels(lacunary_series(w, 20, {}, seed), flat_domain(), w, x, levels, 1e-9);
    const auto ctl = lil_ratio_profile_levels(weight_field(w), flat_domain(), w, x, levels, 1e-9);
    std::cout << "level,lacunary_ratio,control_ratio\n";
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::cout << fmt17(levels[l]) << ',' << (lac.ratios[l] ? fmt17(*lac.ratios[l]) : "") << ','
                << (ctl.ratios[l] ? fmt17(*ctl.ratios[l]) : "") << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
