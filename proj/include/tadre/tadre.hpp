#pragma once

// Umbrella header for the tadre library.

#include "tadre/config.hpp"
#include "tadre/dataset.hpp"
#include "tadre/engine.hpp"
#include "tadre/eval.hpp"
#include "tadre/lcs.hpp"
#include "tadre/llm.hpp"
#include "tadre/pipeline.hpp"
#include "tadre/prompts.hpp"
#include "tadre/retrieval.hpp"
#include "tadre/sql.hpp"
#include "tadre/table.hpp"
#include "tadre/table_io.hpp"
#include "tadre/tokenizer.hpp"
#include "tadre/values.hpp"
