#ifndef SADL_SADL_HPP_
#define SADL_SADL_HPP_

#include "sadl/ablation.hpp"
#include "sadl/classify.hpp"
#include "sadl/data_io.hpp"
#include "sadl/distributed.hpp"
#include "sadl/error.hpp"
#include "sadl/model.hpp"
#include "sadl/solver.hpp"

#endif  // SADL_SADL_HPP_
