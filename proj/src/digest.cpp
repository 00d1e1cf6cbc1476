#include "xdrmob/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <vector>

#include "xdrmob/error.hpp"

namespace xdrmob {

struct Sha256::Impl {
    EVP_MD_CTX* ctx = nullptr;
    bool finished = false;
};

Sha256::Sha256() : impl_(std::make_unique<Impl>())
{
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::IoError, "SHA-256 initialisation failed");
    }
}

Sha256::~Sha256()
{
    EVP_MD_CTX_free(impl_->ctx);
}

void Sha256::update(std::string_view data)
{
    if (impl_->finished) {
        throw Error(Errc::ValidationError, "digest already finalised");
    }
    if (EVP_DigestUpdate(impl_->ctx, data.data(), data.size()) != 1) {
        throw Error(Errc::IoError, "SHA-256 update failed");
    }
}

std::string Sha256::hex()
{
    if (impl_->finished) {
        throw Error(Errc::ValidationError, "digest already finalised");
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(impl_->ctx, md.data(), &len) != 1) {
        throw Error(Errc::IoError, "SHA-256 finalisation failed");
    }
    impl_->finished = true;
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::string_view data)
{
    Sha256 h;
    h.update(data);
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::IoError, "cannot open " + path.string());
    }
    Sha256 h;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) {
            h.update(std::string_view(buf.data(), static_cast<std::size_t>(got)));
        }
    }
    if (in.bad()) {
        throw Error(Errc::IoError, "read failed: " + path.string());
    }
    return h.hex();
}

}  // namespace xdrmob
