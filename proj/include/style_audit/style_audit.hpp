#pragma once

#include "style_audit/answereval.hpp"
#include "style_audit/bm25.hpp"
#include "style_audit/corpus.hpp"
#include "style_audit/digest.hpp"
#include "style_audit/disk_cache.hpp"
#include "style_audit/embedding.hpp"
#include "style_audit/error.hpp"
#include "style_audit/rankeval.hpp"
#include "style_audit/report.hpp"
#include "style_audit/scorers.hpp"
#include "style_audit/style.hpp"
#include "style_audit/stylegen.hpp"
#include "style_audit/textstats.hpp"
#include "style_audit/tokenizer.hpp"
#include "style_audit/transport.hpp"
