// Writes the synthetic open-set benchmark as a flow CSV.
//
//   rpmnet_make_fixture OUT.csv [SEED]

#include <cmath>
#include <iostream>
#include <string>

#include "rpmnet/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::cerr << "usage: rpmnet_make_fixture OUT.csv [SEED]\n";
        return 2;
    }
    const std::uint64_t seed = argc == 3 ? std::stoull(argv[2]) : 42;
    const auto blobs = rpmnet::synthetic::open_set_benchmark();
    auto records = rpmnet::synthetic::sample(blobs, seed);
    // Six decimals keep the file small and still far below the cluster spread.
    for (auto& r : records)
        for (double& v : r.features) v = std::round(v * 1e6) / 1e6;
    rpmnet::synthetic::write_flows(argv[1], records);
    std::cout << "wrote " << records.size() << " records to " << argv[1] << "\n";
    return 0;
}
