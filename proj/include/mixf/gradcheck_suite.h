#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mixf/gradcheck.h"
#include "mixf/model.h"

namespace mixf {

struct GradCheckComponent {
    std::string name;
    double tolerance = 1e-4;
    std::function<GradCheckReport()> run;
};

/// Wraps f so its backward is wrong; used to prove the harness notices.
ScalarFunction corrupt_backward(ScalarFunction f);

/// Model configuration used by the full-step checks: d_model 8, 2 heads,
/// 1 layer, sequence length 4, dropout off.
ModelConfig tiny_model_config(HeadKind head = HeadKind::classification);
/// Two-row batch for tiny_model_config, second row padded.
EncodedBatch tiny_batch(HeadKind head = HeadKind::classification);

/// Every primitive op, the mix layer, the head and full tiny-model training
/// steps. A component named by corrupt gets a broken backward.
std::vector<GradCheckComponent> gradcheck_components(std::string_view corrupt = {});

struct ComponentOutcome {
    std::string name;
    double tolerance = 0.0;
    GradCheckReport report;
    std::string error;  // set if the check threw
    bool passed() const { return error.empty() && report.passed && report.max_rel_error < tolerance; }
};

struct SuiteOutcome {
    std::vector<ComponentOutcome> components;
    std::vector<std::string> offenders;
    double seconds = 0.0;
    bool passed() const { return offenders.empty(); }
};

SuiteOutcome run_gradcheck_suite(const std::vector<GradCheckComponent>& components);

}  // namespace mixf
