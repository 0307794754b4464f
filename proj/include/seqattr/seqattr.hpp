#pragma once

#include "seqattr/attribution.hpp"
#include "seqattr/clustering.hpp"
#include "seqattr/core.hpp"
#include "seqattr/error.hpp"
#include "seqattr/ingest.hpp"
#include "seqattr/json_io.hpp"
#include "seqattr/norce.hpp"
#include "seqattr/pipeline.hpp"
#include "seqattr/sampling.hpp"
#include "seqattr/stats.hpp"
#include "seqattr/summarize.hpp"
#include "seqattr/synthetic.hpp"
