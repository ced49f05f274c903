#ifndef DCLM_DCLM_HPP
#define DCLM_DCLM_HPP

#include "dclm/corpus.hpp"
#include "dclm/eval.hpp"
#include "dclm/graph.hpp"
#include "dclm/model.hpp"
#include "dclm/nn.hpp"
#include "dclm/rng.hpp"
#include "dclm/tensor.hpp"
#include "dclm/train.hpp"

#endif  // DCLM_DCLM_HPP
