#pragma once

#include <filesystem>
#include <iosfwd>

#include "tnvae/mlp.hpp"
#include "tnvae/vae.hpp"

namespace tnvae {

// Text checkpoints: layer shapes, then row-major parameter values in shortest
// round-trip decimal form, so reloading reproduces every bit.

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void write_checkpoint(std::ostream& out, const VaeModel& model);
VaeModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_checkpoint(const std::filesystem::path& path);

} // namespace tnvae
