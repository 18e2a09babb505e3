#include "binio.hpp"

#include <cstdio>
#include <fstream>

namespace rsim::binio {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    if (end < 0) throw IoError("cannot determine size of " + path.string());
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(end));
    if (!buf.empty()) in.read(reinterpret_cast<char*>(buf.data()), end);
    if (!in) throw IoError("failed reading " + path.string());
    return buf;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    if (!buf.empty()) out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) {
        out.close();
        std::remove(path.string().c_str()); // do not leave a torn file behind
        throw IoError("failed writing " + path.string());
    }
}

} // namespace rsim::binio
