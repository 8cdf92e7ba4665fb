#ifndef KGTRUST_KGTRUST_HPP
#define KGTRUST_KGTRUST_HPP

#include "binary_io.hpp"
#include "cache.hpp"
#include "config.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "fusion.hpp"
#include "kg_store.hpp"
#include "nn.hpp"
#include "path_inference.hpp"
#include "pipeline.hpp"
#include "resource_rank.hpp"
#include "synthetic.hpp"
#include "transe.hpp"
#include "types.hpp"

#endif // KGTRUST_KGTRUST_HPP
