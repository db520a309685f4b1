#pragma once

// Feature tables, modality alignment, few-shot episode sampling and the
// synthetic two-view generator.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "gct/errors.hpp"
#include "gct/igl.hpp"
#include "gct/numkit.hpp"

namespace gct {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of stream `index` under `master`; independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

struct FeatureSet {
    std::string modality;
    Matrix embeddings;               // dim x N, one column per sample
    std::vector<std::string> ids;
    std::vector<ClassLabel> labels;

    Eigen::Index dim() const { return embeddings.rows(); }
    std::size_t size() const { return ids.size(); }

    void validate() const {
        if (embeddings.cols() != static_cast<Eigen::Index>(ids.size()) || labels.size() != ids.size())
            throw ValidationError("feature set '" + modality + "': ids, labels and embeddings disagree in count");
        if (ids.empty()) throw ValidationError("feature set '" + modality + "' has no samples");
        if (embeddings.rows() < 1) throw ValidationError("feature set '" + modality + "' has zero dimension");
        require_finite(embeddings, "feature set '" + modality + "'");
        std::unordered_set<std::string> seen;
        for (const auto& id : ids)
            if (!seen.insert(id).second) throw ValidationError("duplicate sample id '" + id + "'");
    }

    /// Columns for the given sample positions.
    Matrix columns(std::span<const std::size_t> idx) const {
        Matrix out(embeddings.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j)
            out.col(static_cast<Eigen::Index>(j)) = embeddings.col(static_cast<Eigen::Index>(idx[j]));
        return out;
    }
};

/// Two views of the same samples, in the same order.
struct MultiModalSet {
    FeatureSet a;
    FeatureSet b;

    std::size_t size() const { return a.size(); }
    const std::vector<ClassLabel>& labels() const { return a.labels; }
    const FeatureSet& view(int m) const { return m == 0 ? a : b; }
};

enum class TableFormat { csv, fvec };

// ---------------------------------------------------------------------------
// Table I/O

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, std::string_view what) {
    field = trim(field);
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty())
        throw ParseError(line, "cannot parse " + std::string(what) + " '" + std::string(field) + "'");
    return value;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline FeatureSet parse_csv_table(std::istream& in, std::string modality) {
    FeatureSet fs;
    fs.modality = std::move(modality);
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(1, "missing header line");
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_commas(detail::trim(line));
    if (header.size() < 3 || detail::trim(header[0]) != "id" || detail::trim(header[1]) != "label")
        throw ParseError(line_no, "header must be 'id,label,f0,...'");
    const std::size_t dim = header.size() - 2;

    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim(line);
        if (row.empty()) continue;
        const auto fields = detail::split_commas(row);
        if (fields.size() != dim + 2)
            throw ParseError(line_no, "expected " + std::to_string(dim + 2) + " columns, found " +
                                          std::to_string(fields.size()));
        const std::string_view id = detail::trim(fields[0]);
        if (id.empty()) throw ParseError(line_no, "empty sample id");
        fs.ids.emplace_back(id);
        fs.labels.push_back(detail::parse_number<ClassLabel>(fields[1], line_no, "label"));
        for (std::size_t f = 0; f < dim; ++f) {
            const double v = detail::parse_number<double>(fields[f + 2], line_no, "feature");
            if (!std::isfinite(v)) throw ValidationError("line " + std::to_string(line_no) + ": non-finite feature value");
            values.push_back(v);
        }
    }
    fs.embeddings = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>(
        values.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(fs.ids.size()));
    fs.validate();
    return fs;
}

inline void write_csv_table(std::ostream& out, const FeatureSet& fs) {
    out << "id,label";
    for (Eigen::Index f = 0; f < fs.dim(); ++f) out << ",f" << f;
    out << '\n';
    for (std::size_t i = 0; i < fs.size(); ++i) {
        out << fs.ids[i] << ',' << fs.labels[i];
        for (Eigen::Index f = 0; f < fs.dim(); ++f)
            out << ',' << detail::format_double(fs.embeddings(f, static_cast<Eigen::Index>(i)));
        out << '\n';
    }
}

inline FeatureSet parse_fvec_table(std::istream& in) {
    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError(1, "missing JSON header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("invalid JSON header: ") + e.what());
    }
    FeatureSet fs;
    std::size_t dim = 0;
    std::size_t n = 0;
    try {
        fs.modality = header.value("modality", std::string{});
        dim = header.at("dim").get<std::size_t>();
        n = header.at("n").get<std::size_t>();
        for (const auto& id : header.at("ids")) fs.ids.push_back(id.is_string() ? id.get<std::string>() : id.dump());
        fs.labels = header.at("labels").get<std::vector<ClassLabel>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("malformed header: ") + e.what());
    }
    if (fs.ids.size() != n || fs.labels.size() != n)
        throw ParseError(1, "header declares n=" + std::to_string(n) + " but lists " + std::to_string(fs.ids.size()) +
                                " ids and " + std::to_string(fs.labels.size()) + " labels");
    if (dim < 1) throw ParseError(1, "dim must be at least 1");

    std::vector<unsigned char> raw(n * dim * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw ParseError(2, "payload holds " + std::to_string(in.gcount()) + " bytes, expected " +
                                std::to_string(raw.size()));
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError(2, "trailing bytes after payload");

    fs.embeddings.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t f = 0; f < dim; ++f) {
            const unsigned char* p = raw.data() + (s * dim + f) * 4;
            const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                                       (std::uint32_t(p[3]) << 24);
            fs.embeddings(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(s)) =
                static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    fs.validate();
    return fs;
}

/// Values are stored as 32-bit floats; anything not representable is rounded.
inline void write_fvec_table(std::ostream& out, const FeatureSet& fs) {
    nlohmann::ordered_json header = {{"modality", fs.modality},
                             {"dim", fs.dim()},
                             {"n", fs.size()},
                             {"ids", fs.ids},
                             {"labels", fs.labels}};
    out << header.dump() << '\n';
    std::vector<unsigned char> raw;
    raw.reserve(fs.size() * static_cast<std::size_t>(fs.dim()) * 4);
    for (Eigen::Index s = 0; s < fs.embeddings.cols(); ++s) {
        for (Eigen::Index f = 0; f < fs.dim(); ++f) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(fs.embeddings(f, s)));
            for (int byte = 0; byte < 4; ++byte) raw.push_back(static_cast<unsigned char>((bits >> (8 * byte)) & 0xFF));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline FeatureSet load_feature_table(const std::string& path, TableFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    if (format == TableFormat::fvec) return parse_fvec_table(in);
    std::string stem = path;
    if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem.erase(0, slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos) stem.erase(dot);
    return parse_csv_table(in, stem);
}

inline void save_feature_table(const std::string& path, const FeatureSet& fs, TableFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (format == TableFormat::fvec)
        write_fvec_table(out, fs);
    else
        write_csv_table(out, fs);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Alignment

/// Reorders `b` to follow `a`'s sample order after checking both views cover
/// the same ids with the same labels.
inline MultiModalSet align_modalities(FeatureSet a, FeatureSet b) {
    a.validate();
    b.validate();
    if (a.dim() < 1 || b.dim() < 1) throw ValidationError("empty embedding dimension");

    std::unordered_map<std::string, std::size_t> pos_b;
    pos_b.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) pos_b.emplace(b.ids[i], i);

    std::vector<std::string> offending;
    std::vector<std::size_t> order;
    order.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto it = pos_b.find(a.ids[i]);
        if (it == pos_b.end() || b.labels[it->second] != a.labels[i]) {
            offending.push_back(a.ids[i]);
            continue;
        }
        order.push_back(it->second);
    }
    if (offending.empty() && b.size() != a.size()) {
        std::unordered_set<std::string> in_a(a.ids.begin(), a.ids.end());
        for (const auto& id : b.ids)
            if (!in_a.contains(id)) offending.push_back(id);
    }
    if (!offending.empty()) {
        std::string msg = "modalities disagree on " + std::to_string(offending.size()) + " sample(s):";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, offending.size()); ++i) msg += " " + offending[i];
        throw AlignmentError(msg);
    }

    FeatureSet b_sorted;
    b_sorted.modality = b.modality;
    b_sorted.ids = a.ids;
    b_sorted.labels = a.labels;
    b_sorted.embeddings = b.columns(order);
    return MultiModalSet{std::move(a), std::move(b_sorted)};
}

// ---------------------------------------------------------------------------
// Episodes

enum class Regime { isfsl, tsfsl, issfsl, tssfsl };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::isfsl: return "isfsl";
        case Regime::tsfsl: return "tsfsl";
        case Regime::issfsl: return "issfsl";
        case Regime::tssfsl: return "tssfsl";
    }
    return "?";
}

inline bool is_semi_supervised(Regime r) { return r == Regime::issfsl || r == Regime::tssfsl; }
inline bool is_transductive(Regime r) { return r == Regime::tsfsl || r == Regime::tssfsl; }

struct EpisodeSpec {
    std::size_t ways = 5;
    std::size_t shots = 1;
    std::size_t queries = 15;
    std::size_t unlabeled = 80;
    Regime regime = Regime::issfsl;
    std::uint64_t seed = 42;
    bool unlabeled_from_all_classes = false;

    void validate() const {
        if (ways < 2) throw ValidationError("ways must be at least 2");
        if (shots < 1) throw ValidationError("shots must be at least 1");
        if (queries < 1) throw ValidationError("queries must be at least 1");
        if (!is_semi_supervised(regime) && unlabeled != 0)
            throw ValidationError("regime " + to_string(regime) + " takes no unlabeled samples");
    }
};

/// Sample positions (into the MultiModalSet order) of one episode.
struct Episode {
    std::vector<std::size_t> support;
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> query;
    std::vector<ClassLabel> roster;  // ascending
};

/// Roster first, then O support and Q query per roster class, then U
/// unlabeled drawn from what remains.
inline Episode sample_episode(const MultiModalSet& data, const EpisodeSpec& spec, Rng& rng) {
    spec.validate();
    std::map<ClassLabel, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels()[i]].push_back(i);
    if (by_class.size() < spec.ways)
        throw CapacityError("episode needs " + std::to_string(spec.ways) + " classes but the data has " +
                            std::to_string(by_class.size()));

    std::vector<ClassLabel> classes;
    for (const auto& [label, members] : by_class) classes.push_back(label);
    std::shuffle(classes.begin(), classes.end(), rng);
    classes.resize(spec.ways);
    std::sort(classes.begin(), classes.end());

    Episode ep;
    ep.roster = classes;
    std::vector<std::size_t> remainder;
    for (const ClassLabel c : classes) {
        auto members = by_class.at(c);
        if (members.size() < spec.shots + spec.queries)
            throw CapacityError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                " samples, needs " + std::to_string(spec.shots + spec.queries));
        std::shuffle(members.begin(), members.end(), rng);
        ep.support.insert(ep.support.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(spec.shots));
        ep.query.insert(ep.query.end(), members.begin() + static_cast<std::ptrdiff_t>(spec.shots),
                        members.begin() + static_cast<std::ptrdiff_t>(spec.shots + spec.queries));
        remainder.insert(remainder.end(), members.begin() + static_cast<std::ptrdiff_t>(spec.shots + spec.queries),
                         members.end());
    }
    if (spec.unlabeled_from_all_classes) {
        for (const auto& [label, members] : by_class)
            if (!std::binary_search(classes.begin(), classes.end(), label))
                remainder.insert(remainder.end(), members.begin(), members.end());
    }
    if (remainder.size() < spec.unlabeled)
        throw CapacityError("unlabeled pool needs " + std::to_string(spec.unlabeled) + " samples but only " +
                            std::to_string(remainder.size()) + " remain");
    if (spec.unlabeled > 0) {
        std::shuffle(remainder.begin(), remainder.end(), rng);
        ep.unlabeled.assign(remainder.begin(), remainder.begin() + static_cast<std::ptrdiff_t>(spec.unlabeled));
    }
    return ep;
}

inline Episode sample_episode(const MultiModalSet& data, const EpisodeSpec& spec, std::uint64_t episode_seed) {
    Rng rng(episode_seed);
    return sample_episode(data, spec, rng);
}

// ---------------------------------------------------------------------------
// Synthetic two-view data

struct SynthSpec {
    std::size_t classes = 5;
    std::size_t per_class = 100;
    std::size_t dim = 32;
    double separation = 6.0;
    std::uint64_t seed = 7;
};

namespace detail {

inline double std_normal(Rng& rng) {
    // Box-Muller over 53-bit uniforms; std::normal_distribution is not
    // specified bit-for-bit across standard libraries.
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/// Class means (dim x classes) with every pairwise distance >= separation.
inline Matrix place_means(std::size_t classes, std::size_t dim, double separation, Rng& rng) {
    Matrix dirs(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(classes));
    for (Eigen::Index c = 0; c < dirs.cols(); ++c)
        for (Eigen::Index f = 0; f < dirs.rows(); ++f) dirs(f, c) = std_normal(rng);
    if (separation <= 0.0) return Matrix::Zero(dirs.rows(), dirs.cols());
    if (classes <= dim) {
        // Orthonormal directions scaled by s / sqrt(2): a regular simplex
        // with every edge exactly s.
        const Eigen::HouseholderQR<Matrix> qr(dirs);
        const Matrix q = qr.householderQ() * Matrix::Identity(dirs.rows(), dirs.cols());
        return q * (separation / std::sqrt(2.0));
    }
    double min_dist = std::numeric_limits<double>::infinity();
    const Matrix d = pairwise_sq_dist(dirs);
    for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index i = j + 1; i < d.rows(); ++i) min_dist = std::min(min_dist, std::sqrt(d(i, j)));
    return dirs * (separation / min_dist);
}

}  // namespace detail

/// Two views of the same labeled samples. Each view places its own class
/// means and draws its own unit-variance isotropic noise, so the views' errors
/// are independent.
inline MultiModalSet synth_two_modal(const SynthSpec& spec) {
    if (spec.classes < 2) throw ValidationError("synth needs at least 2 classes");
    if (spec.per_class < 2) throw ValidationError("synth needs at least 2 samples per class");
    if (spec.dim < 2) throw ValidationError("synth needs dim >= 2");
    if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation))
        throw ValidationError("separation must be a nonnegative number");

    const std::size_t n = spec.classes * spec.per_class;
    std::vector<std::string> ids;
    std::vector<ClassLabel> labels;
    ids.reserve(n);
    labels.reserve(n);
    for (std::size_t c = 0; c < spec.classes; ++c)
        for (std::size_t i = 0; i < spec.per_class; ++i) {
            ids.push_back("s" + std::to_string(c * spec.per_class + i));
            labels.push_back(static_cast<ClassLabel>(c));
        }

    MultiModalSet out;
    for (int m = 0; m < 2; ++m) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(m)));
        FeatureSet& fs = m == 0 ? out.a : out.b;
        fs.modality = m == 0 ? "a" : "b";
        fs.ids = ids;
        fs.labels = labels;
        const Matrix means = detail::place_means(spec.classes, spec.dim, spec.separation, rng);
        fs.embeddings.resize(static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < n; ++s) {
            const auto col = static_cast<Eigen::Index>(s);
            const auto c = static_cast<Eigen::Index>(labels[s]);
            for (Eigen::Index f = 0; f < fs.embeddings.rows(); ++f)
                fs.embeddings(f, col) = means(f, c) + detail::std_normal(rng);
        }
    }
    return out;
}

}  // namespace gct
