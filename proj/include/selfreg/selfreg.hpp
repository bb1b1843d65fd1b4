#pragma once

#include "selfreg/classifier.hpp"
#include "selfreg/digest.hpp"
#include "selfreg/embedding_store.hpp"
#include "selfreg/interpret.hpp"
#include "selfreg/judge.hpp"
#include "selfreg/optim.hpp"
#include "selfreg/sae.hpp"
#include "selfreg/sae_train.hpp"
#include "selfreg/samplesize.hpp"
#include "selfreg/synthbench.hpp"
