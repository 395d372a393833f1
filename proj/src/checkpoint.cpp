#include "susd/checkpoint.hpp"

#include <filesystem>
#include <fstream>

namespace susd {

namespace fs = std::filesystem;

void Checkpoint::save(const std::string& dir) const {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["blob"] = "params.bin";
  manifest["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  nlohmann::json arrays = nlohmann::json::array();

  std::ofstream blob(fs::path(dir) / "params.bin", std::ios::binary);
  if (!blob) throw IoError("checkpoint: cannot write blob in " + dir);
  size_t offset = 0;
  for (const auto& [name, e] : entries_) {
    arrays.push_back({{"name", name},
                      {"shape", {e.rows, e.cols}},
                      {"dtype", e.dtype},
                      {"offset", offset},
                      {"bytes", e.bytes.size()}});
    blob.write(reinterpret_cast<const char*>(e.bytes.data()),
               static_cast<std::streamsize>(e.bytes.size()));
    offset += e.bytes.size();
  }
  blob.close();
  manifest["arrays"] = arrays;

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("checkpoint: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("checkpoint: no manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad manifest: ") + e.what());
  }

  std::ifstream blob(fs::path(dir) / manifest.value("blob", "params.bin"),
                     std::ios::binary);
  if (!blob) throw IoError("checkpoint: no blob in " + dir);

  Checkpoint ck;
  ck.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& a : manifest.at("arrays")) {
    Entry e;
    e.dtype = a.at("dtype").get<std::string>();
    e.rows = a.at("shape").at(0).get<int>();
    e.cols = a.at("shape").at(1).get<int>();
    const size_t nbytes = a.at("bytes").get<size_t>();
    e.bytes.resize(nbytes);
    blob.seekg(static_cast<std::streamoff>(a.at("offset").get<size_t>()));
    blob.read(reinterpret_cast<char*>(e.bytes.data()),
              static_cast<std::streamsize>(nbytes));
    if (!blob) throw IoError("checkpoint: truncated blob in " + dir);
    ck.entries_[a.at("name").get<std::string>()] = std::move(e);
  }
  return ck;
}

}  // namespace susd
