#include "serlab/cost_model.hpp"

#include <cmath>

#include "serlab/errors.hpp"

namespace serlab {

void validate(const CostInputs& in) {
  const double vals[] = {in.words_per_task,  in.usd_per_50_words,
                         in.llm_in_tokens,   in.llm_out_tokens,
                         in.usd_per_1k_in,   in.usd_per_1k_out,
                         in.gpu_usd_per_hour, in.seed_fraction,
                         in.composite_inference_scale};
  for (double v : vals) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("cost inputs must be finite and non-negative");
    }
  }
  if (in.calls_per_pair < 0 || in.extra_inferences < 0) {
    throw ConfigError("cost counts must be non-negative");
  }
  if (in.gpus < 1) throw ConfigError("cost.gpus must be >= 1");
  if (in.slot_minutes < 1 || 60 % in.slot_minutes != 0) {
    throw ConfigError("cost.slot_minutes must divide 60");
  }
}

AnnotationCosts annotation_costs(const CostInputs& in) {
  validate(in);
  AnnotationCosts out;
  out.human_usd_per_sample = in.words_per_task * in.usd_per_50_words / 50.0;
  out.llm_usd_per_sample =
      in.calls_per_pair * (in.llm_in_tokens * in.usd_per_1k_in +
                           in.llm_out_tokens * in.usd_per_1k_out) /
      1000.0;
  return out;
}

PipelineCosts pipeline_cost(const CostInputs& in) {
  validate(in);
  if (in.samples_per_slot <= 0) {
    throw ArgumentError("cost.samples_per_slot must be > 0");
  }
  PipelineCosts out;
  const double slots_per_hour = 60.0 / in.slot_minutes;
  out.inference_usd_per_sample = (in.gpu_usd_per_hour / in.gpus) /
                                 (in.samples_per_slot * slots_per_hour);
  const double human = annotation_costs(in).human_usd_per_sample;
  const double human_term =
      in.rounded_human_in_composite ? std::round(human * 100.0) / 100.0 : human;
  out.ser_usd_per_sample = human_term * in.seed_fraction +
                           in.extra_inferences * out.inference_usd_per_sample *
                               in.composite_inference_scale;
  return out;
}

}  // namespace serlab
