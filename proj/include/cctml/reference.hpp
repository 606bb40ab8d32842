#pragma once

// Published comparison figures used as fixtures and in reproduction reports.
// Subgroup arrays run band-major, girls before boys.

#include <array>
#include <string_view>

namespace cctml::reference {

using Row8 = std::array<double, 8>;

struct RatePanel {
    std::string_view label;
    Row8 actual;
    Row8 predicted;
    Row8 error;
};

struct Score {
    std::string_view model;
    double mae;
    double rmse;
    double accuracy;  // negative when not reported
};

struct TrainTestScore {
    std::string_view model;
    double train_mae;
    double train_rmse;
    double test_mae;
    double test_rmse;
};

// One-step attendance, 1998 treatment group.
inline constexpr RatePanel kOneStepTw2006 = {
    "TW2006",
    {98.5, 98.7, 74.4, 76.3, 71.4, 71.6, 51.5, 58.3},
    {97.1, 97.1, 74.9, 77.1, 72.3, 72.9, 58.7, 66.7},
    {-1.4, -1.6, 0.5, 0.8, 0.9, 1.3, 7.2, 8.4}};

inline constexpr Row8 kOneStepCartError = {1.1, 0.8, 4.1, 0.6, 2.7, -4.0, -1.2, -5.7};

inline constexpr std::array<Score, 6> kOneStepComparison = {{{"TW2006", 2.76, 4.04, -1},
                                                             {"CART", 2.53, 3.09, -1},
                                                             {"C4.5", 2.54, 3.32, -1},
                                                             {"LASSO", 2.31, 2.66, -1},
                                                             {"Random forest", 2.18, 2.91, -1},
                                                             {"Adaboost", 2.15, 2.65, -1}}};

// Within-sample structural fit (control 1997, control 1998, treatment 1997).
inline constexpr std::array<RatePanel, 3> kWithinSampleTw2006 = {{
    {"control 1997",
     {96.9, 96.6, 65.3, 68.8, 58.3, 64.0, 40.9, 59.0},
     {96.1, 96.4, 61.6, 68.8, 54.2, 63.9, 40.2, 55.0},
     {-0.8, -0.2, -3.7, 0.0, -4.1, -0.1, -0.7, -4.0}},
    {"control 1998",
     {96.5, 96.7, 66.5, 72.5, 58.7, 67.4, 44.4, 57.1},
     {96.2, 96.4, 61.8, 68.8, 55.5, 65.3, 45.3, 53.0},
     {-0.3, -0.3, -4.7, -3.7, -3.2, -2.1, 0.9, -4.1}},
    {"treatment 1997",
     {97.6, 97.6, 62.9, 69.5, 56.9, 64.2, 30.3, 52.6},
     {96.4, 96.3, 61.8, 68.0, 55.6, 62.7, 37.3, 51.7},
     {-1.2, -1.3, -1.1, -1.5, -1.3, -1.5, 7.0, -0.9}},
}};

inline constexpr std::array<Score, 6> kWithinSampleComparison = {{{"TW2006", 2.03, 2.71, -1},
                                                                 {"CART", 4.58, 5.22, 86.23},
                                                                 {"C4.5", 0.86, 1.10, 97.87},
                                                                 {"LASSO", 3.90, 5.19, 81.09},
                                                                 {"Random forest", 1.06, 1.28, 98.95},
                                                                 {"Adaboost", 3.72, 4.23, 89.30}}};

// N-step structural simulation; actual rates equal the within-sample panels.
inline constexpr std::array<RatePanel, 3> kNStepTw2006 = {{
    {"control 1997",
     {96.9, 96.6, 65.3, 68.8, 58.3, 64.0, 40.9, 59.0},
     {95.3, 93.3, 58.2, 62.5, 52.4, 56.4, 41.3, 51.1},
     {-1.6, -3.3, -7.1, -6.3, -5.9, -7.6, 0.4, -7.9}},
    kWithinSampleTw2006[1],
    kWithinSampleTw2006[2],
}};

inline constexpr std::array<TrainTestScore, 5> kIncome = {{{"TW2006", 7121, 12663, 6833, 14257},
                                                          {"CART", 6429, 12526, 6087, 14112},
                                                          {"LASSO", 6424, 12489, 6061, 14062},
                                                          {"Random forest", 4721, 9263, 5747, 13809},
                                                          {"Adaboost", 6188, 11914, 5891, 14022}}};

inline constexpr std::array<TrainTestScore, 6> kPregnancy = {{{"CART", 5.02, 5.55, 3.63, 6.96},
                                                             {"C4.5", 6.75, 7.39, 1.50, 1.64},
                                                             {"LASSO", 9.42, 13.42, 11.35, 16.48},
                                                             {"Random forest", 6.08, 6.57, 4.43, 6.11},
                                                             {"Adaboost", 6.63, 7.28, 4.90, 5.48},
                                                             {"Logit", 2.59, 3.48, 1.30, 1.45}}};

inline constexpr std::array<TrainTestScore, 7> kFailure = {{{"TW2006", 4.36, 5.87, 1.65, 2.31},
                                                           {"CART", 6.04, 7.05, 4.20, 5.14},
                                                           {"C4.5", 12.80, 13.90, 11.64, 11.88},
                                                           {"LASSO", 14.09, 15.25, 13.31, 13.48},
                                                           {"Random forest", 3.33, 4.24, 9.41, 10.67},
                                                           {"Adaboost", 7.94, 10.30, 6.98, 8.32},
                                                           {"Logit", 4.78, 6.40, 3.44, 5.81}}};

// Share of training child rows with a pregnant mother, in percent.
inline constexpr double kPregnancyRate = 12.94;

}  // namespace cctml::reference
