#pragma once

#include "sizegraph/brand_similarity.hpp"
#include "sizegraph/bundle.hpp"
#include "sizegraph/error.hpp"
#include "sizegraph/eval.hpp"
#include "sizegraph/ingest.hpp"
#include "sizegraph/matrix.hpp"
#include "sizegraph/service.hpp"
#include "sizegraph/size_graph.hpp"
#include "sizegraph/skipgram.hpp"
#include "sizegraph/types.hpp"
#include "sizegraph/wbsr.hpp"
