#include "cphmm/datasets.hpp"

#include "cphmm/errors.hpp"

namespace cphmm::datasets {

namespace {

// Annual counts of British coal-mining accidents, 1851-1962.
constexpr double kCoal[] = {
    4, 5, 4, 1, 0, 4, 3, 4, 0, 6, 3, 3, 4, 0, 2, 6,
    3, 3, 5, 4, 5, 3, 1, 4, 4, 1, 5, 5, 3, 4, 2, 5,
    2, 2, 3, 4, 2, 1, 3, 2, 2, 1, 1, 1, 1, 3, 0, 0,
    1, 0, 1, 1, 0, 0, 3, 1, 0, 3, 2, 2, 0, 1, 1, 1,
    0, 1, 0, 1, 0, 0, 0, 2, 1, 0, 0, 0, 1, 1, 0, 2,
    3, 3, 1, 1, 2, 1, 1, 1, 1, 2, 4, 2, 0, 0, 0, 1,
    4, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 1
};

// Log-reference ratios along chromosome 10 of the BT474 breast-cancer cell
// line.
constexpr double kBt474[] = {
    0.3362, 0.2793, 0.3742, 0.4424, 0.1238, 0.3590, 0.1655, 0.3552,
    0.1504, 0.2983, 0.3173, 0.1428, 0.1276, 0.8824, 0.3438, 0.2642,
    0.1390, 0.3211, 0.4235, 0.2338, 0.2983, 0.2376, 0.2452, 0.3362,
    0.3400, 0.3248, 0.3666, 0.4766, 0.7193, 0.3135, 0.1883, 0.1466,
    0.3211, 0.3779, 0.2376, 0.1655, 0.3173, 0.0252, 0.2528, 0.3324,
    0.2528, 0.2755, 0.2945, 0.1997, 0.2376, 0.1807, 0.6510, 0.3552,
    0.1883, 0.1655, 0.2680, 0.2642, 0.2680, 0.1883, 0.1997, 0.1693,
    0.3362, 0.2111, 0.2755, 0.2680, 0.2680, 0.2983, 0.1162, 0.3476,
    0.3817, 0.8331, 0.3097, 0.2376, 0.0556, 0.0707, 0.1655, 0.1769,
    0.2111, -0.0696, 0.2149, 0.0214, 0.1238, -0.7333, -0.7409, 0.0366,
    0.0897, 0.1769, 0.0404, 0.0935, 0.1466, 0.6169, 0.1921, 0.2300,
    0.3476, 0.1921, 0.6055, 0.0935, 0.0518, -0.0582, -0.6423, 0.4083,
    -0.7864, -0.8964, -0.6120, -0.7258, -0.6347, -0.7940, -0.6120, -0.6006,
    -0.1986, -0.6044, -0.4754, -0.6234, -0.7030, -0.5323, 0.3097, -0.8395,
    -1.0064, -0.8206, -0.8851, -0.0506, -0.7409, -0.7296, -1.5526, -0.1455
};

}  // namespace

ObservationSeries coal() {
  return ObservationSeries(std::vector<double>(std::begin(kCoal), std::end(kCoal)));
}

ObservationSeries bt474() {
  return ObservationSeries(std::vector<double>(std::begin(kBt474), std::end(kBt474)));
}

ObservationSeries builtin(const std::string& name) {
  if (name == "coal") return coal();
  if (name == "bt474") return bt474();
  throw Error("unknown builtin dataset: " + name);
}

bool is_builtin(const std::string& name) {
  return name == "coal" || name == "bt474";
}

}  // namespace cphmm::datasets
