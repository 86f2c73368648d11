#ifndef OTE_MODEL_IO_HPP
#define OTE_MODEL_IO_HPP

#include <string>

#include "ote/data.hpp"
#include "ote/layers.hpp"

namespace ote {

struct SavedModel {
  ModelParams<float> params;
  Vocab words;
  Vocab chars;
};

// Container format: magic "OTEM", format version, a key=value metadata
// block (model config plus vocabulary entries), then one record per
// parameter: name length, name bytes, rank, dims, little-endian 32-bit
// floats. Save -> load -> save is byte-identical.
void save_model(const std::string& path, const ModelParams<float>& m,
                const Vocab& words, const Vocab& chars);

SavedModel load_model(const std::string& path);

}  // namespace ote

#endif  // OTE_MODEL_IO_HPP
