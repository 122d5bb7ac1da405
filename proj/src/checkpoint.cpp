#include "comve/checkpoint.hpp"

#include "comve/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>

namespace comve {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'M', 'V', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> bytes{};
    for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 8> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw FormatError(path.string() + ": truncated checkpoint");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

nlohmann::json config_to_json(const EncoderConfig& c) {
    return {{"vocab_size", c.vocab_size},
            {"d_model", c.d_model},
            {"n_heads", c.n_heads},
            {"n_layers", c.n_layers},
            {"d_ff", c.d_ff},
            {"max_sequence_length", c.max_sequence_length},
            {"pooling", std::string(to_string(c.pooling))},
            {"dropout", c.dropout}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_sequence_length = j.at("max_sequence_length").get<std::size_t>();
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    c.dropout = j.value("dropout", 0.0);
    return c;
}

} // namespace

std::filesystem::path vocab_path_for(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".vocab";
    return p;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    const auto params = model.parameters();
    nlohmann::json header;
    header["format"] = "comve-checkpoint";
    header["version"] = 1;
    header["encoder"] = config_to_json(model.spec.encoder);
    header["task"] = std::string(to_string(model.spec.task));
    header["head"] = std::string(to_string(model.spec.head));
    header["template"] = model.spec.templ ? nlohmann::json{{"name", model.spec.templ->name},
                                                           {"pattern", model.spec.templ->pattern}}
                                          : nlohmann::json(nullptr);
    auto& list = header["params"] = nlohmann::json::array();
    for (const auto& p : params) list.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params)
        for (double v : p.tensor.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw InputError("failed writing checkpoint " + path.string());
    model.vocab.save(vocab_path_for(path));
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("checkpoint not found: " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError(path.string() + ": not a checkpoint file");
    }
    const auto header_len = get_u64(in, path);
    if (header_len > (1u << 26)) throw FormatError(path.string() + ": implausible header length");
    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
        throw FormatError(path.string() + ": truncated header");
    }

    ModelSpec spec;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        spec.encoder = config_from_json(header.at("encoder"));
        spec.task = parse_task(header.at("task").get<std::string>());
        spec.head = parse_head(header.at("head").get<std::string>());
        if (!header.at("template").is_null()) {
            spec.templ = TemplateSpec{header["template"].at("name").get<std::string>(),
                                      header["template"].at("pattern").get<std::string>()};
        }
        spec.validate();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("{}: bad header: {}", path.string(), e.what()));
    } catch (const ConfigError& e) {
        throw FormatError(fmt::format("{}: bad header: {}", path.string(), e.what()));
    } catch (const TemplateError& e) {
        throw FormatError(fmt::format("{}: bad header: {}", path.string(), e.what()));
    }

    auto vocab = Vocab::load(vocab_path_for(path));
    if (vocab.size() != spec.encoder.vocab_size) {
        throw FormatError(fmt::format("{}: vocabulary has {} tokens but the encoder expects {}",
                                      vocab_path_for(path).string(), vocab.size(), spec.encoder.vocab_size));
    }
    Model model = Model::create(spec, std::move(vocab), 0);

    const auto& listed = header.at("params");
    auto params = model.parameters();
    if (listed.size() != params.size()) {
        throw FormatError(fmt::format("{}: {} parameters stored, model needs {}", path.string(), listed.size(),
                                      params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto name = listed[i].at("name").get<std::string>();
        const auto shape = listed[i].at("shape").get<Shape>();
        if (name != params[i].name || shape != params[i].tensor.shape()) {
            throw FormatError(fmt::format("{}: parameter '{}' {} does not match expected '{}' {}", path.string(), name,
                                          shape_to_string(shape), params[i].name,
                                          shape_to_string(params[i].tensor.shape())));
        }
        for (auto& v : params[i].tensor.mutable_data()) v = std::bit_cast<double>(get_u64(in, path));
    }
    return model;
}

void copy_parameters(const Model& from, Model& to) {
    const auto src = from.parameters();
    auto dst = to.parameters();
    if (src.size() != dst.size()) throw ContractError("copy_parameters: models differ in structure");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].tensor.shape() != dst[i].tensor.shape()) {
            throw ContractError("copy_parameters: shape mismatch at " + src[i].name);
        }
        auto s = src[i].tensor.data();
        std::copy(s.begin(), s.end(), dst[i].tensor.mutable_data().begin());
    }
}

std::uint64_t parameter_checksum(const Model& model) {
    std::uint64_t hash = 1469598103934665603ull;
    for (const auto& p : model.parameters()) {
        for (double v : p.tensor.data()) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (std::size_t i = 0; i < 8; ++i) {
                hash ^= (bits >> (8 * i)) & 0xFFu;
                hash *= 1099511628211ull;
            }
        }
    }
    return hash;
}

} // namespace comve
