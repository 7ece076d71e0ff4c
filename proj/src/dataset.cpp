#include "ebm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "ebm/binary_io.hpp"
#include "ebm/metrics.hpp"

namespace ebm {

void Dataset::validate() const {
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        if (s.features.size() != dim)
            throw DataError("sample " + std::to_string(k) + " has " + std::to_string(s.features.size()) +
                            " features, dataset dim is " + std::to_string(dim));
        if (s.label >= class_names.size())
            throw DataError("sample " + std::to_string(k) + " has label " + std::to_string(s.label) + " but only " +
                            std::to_string(class_names.size()) + " classes are declared");
        for (double f : s.features)
            if (!(f >= 0.0 && f <= 1.0))
                throw DataError("sample " + std::to_string(k) + " has feature " + format_double(f) +
                                " outside [0, 1]");
    }
}

std::vector<Vector> Dataset::features_of_class(std::size_t label, bool include_synthetic) const {
    std::vector<Vector> out;
    for (const auto& s : samples)
        if (s.label == label && (include_synthetic || !s.synthetic)) out.push_back(s.features);
    return out;
}

std::vector<std::string> default_class_names(std::size_t classes) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("class_" + std::to_string(c));
    return names;
}

ClassDistribution distribution(const Dataset& ds) {
    ClassDistribution d;
    std::size_t classes = ds.num_classes();
    for (const auto& s : ds.samples) classes = std::max(classes, s.label + 1);
    d.counts.assign(classes, 0);
    d.synthetic_counts.assign(classes, 0);
    for (const auto& s : ds.samples) {
        ++d.counts[s.label];
        if (s.synthetic) ++d.synthetic_counts[s.label];
    }
    d.total = ds.samples.size();
    for (auto c : d.synthetic_counts) d.synthetic_total += c;
    if (!d.counts.empty())
        d.majority = static_cast<std::size_t>(std::max_element(d.counts.begin(), d.counts.end()) - d.counts.begin());
    return d;
}

std::string format_distribution(const Dataset& ds, const ClassDistribution& dist) {
    std::ostringstream out;
    out << "class\tname\tsamples\tsynthetic\n";
    for (std::size_t c = 0; c < dist.counts.size(); ++c) {
        const std::string name = c < ds.class_names.size() ? ds.class_names[c] : "?";
        out << c << '\t' << name << '\t' << dist.counts[c] << '\t' << dist.synthetic_counts[c] << '\n';
    }
    out << "total\t\t" << dist.total << '\t' << dist.synthetic_total << '\n';
    out << "majority\t" << dist.majority << '\n';
    return out.str();
}

DataFormat parse_data_format(const std::string& name) {
    if (name == "csv") return DataFormat::csv;
    if (name == "binary" || name == "ebmd") return DataFormat::binary;
    throw std::invalid_argument("unknown data format '" + name + "' (expected csv or binary)");
}

DataFormat format_from_path(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0 ? DataFormat::csv
                                                                              : DataFormat::binary;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        fields.push_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Dataset read_csv(std::istream& in) {
    Dataset ds;
    bool have_dim = false;
    bool have_names = false;
    std::size_t max_label = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
        if (view.front() == '#') {
            if (view.starts_with("#classes,")) {
                ds.class_names.clear();
                for (auto name : split_fields(view.substr(9))) ds.class_names.emplace_back(name);
                have_names = true;
            }
            continue;
        }
        const auto fields = split_fields(view);
        const std::string where = "line " + std::to_string(line_no);
        Sample s;
        std::string_view label = fields[0];
        if (label.starts_with("s:")) {
            s.synthetic = true;
            label.remove_prefix(2);
        }
        if (!parse_number(label, s.label)) throw DataError(where + ": bad label '" + std::string(fields[0]) + "'");
        s.features.resize(fields.size() - 1);
        for (std::size_t k = 1; k < fields.size(); ++k)
            if (!parse_number(fields[k], s.features[k - 1]))
                throw DataError(where + ": bad feature value '" + std::string(fields[k]) + "' in column " +
                                std::to_string(k + 1));
        if (!have_dim) {
            ds.dim = s.features.size();
            have_dim = true;
        } else if (s.features.size() != ds.dim) {
            throw DataError(where + ": " + std::to_string(s.features.size()) + " features, expected " +
                            std::to_string(ds.dim));
        }
        for (double f : s.features)
            if (!(f >= 0.0 && f <= 1.0))
                throw DataError(where + ": feature " + format_double(f) + " outside [0, 1]");
        if (have_names && s.label >= ds.class_names.size())
            throw DataError(where + ": label " + std::to_string(s.label) + " but only " +
                            std::to_string(ds.class_names.size()) + " classes declared");
        max_label = std::max(max_label, s.label);
        ds.samples.push_back(std::move(s));
    }
    if (!have_names) ds.class_names = default_class_names(ds.samples.empty() ? 0 : max_label + 1);
    return ds;
}

void write_csv(std::ostream& out, const Dataset& ds) {
    out << "#classes";
    for (const auto& name : ds.class_names) out << ',' << name;
    out << '\n';
    for (const auto& s : ds.samples) {
        if (s.synthetic) out << "s:";
        out << s.label;
        for (double f : s.features) out << ',' << format_double(f);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: stream write failed");
}

Dataset read_binary(std::istream& in) {
    io::Reader r(in);
    r.expect_tag("EBMD");
    const auto version = r.u8("version");
    if (version != kDatasetFormatVersion)
        throw DataError("unsupported dataset container version " + std::to_string(version));
    const auto encoding = r.u8("encoding flag");
    if (encoding > 1) throw DataError("unknown feature encoding " + std::to_string(encoding) + " at byte offset 5");
    r.get_le<std::uint16_t>("reserved");

    Dataset ds;
    ds.dim = r.u32("dim");
    const std::size_t count = r.u32("count");
    const std::size_t classes = r.u32("class count");
    for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t len = r.u32("class name length");
        std::string name(len, '\0');
        r.read(name.data(), len, "class name");
        ds.class_names.push_back(std::move(name));
    }
    ds.samples.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto at = r.offset();
        ds.samples[k].label = r.u32("labels");
        if (ds.samples[k].label >= classes)
            throw DataError("label " + std::to_string(ds.samples[k].label) + " at byte offset " + std::to_string(at) +
                            " exceeds class count " + std::to_string(classes));
    }
    for (auto& s : ds.samples) {
        const auto flag = r.u8("synthetic flags");
        if (flag > 1) throw DataError("bad synthetic flag at byte offset " + std::to_string(r.offset() - 1));
        s.synthetic = flag == 1;
    }
    for (auto& s : ds.samples) {
        s.features.resize(ds.dim);
        for (double& f : s.features) {
            if (encoding == static_cast<std::uint8_t>(FeatureEncoding::u8)) {
                f = static_cast<double>(r.u8("features")) / 255.0;
            } else {
                const auto at = r.offset();
                f = r.f64("features");
                if (!(f >= 0.0 && f <= 1.0))
                    throw DataError("feature " + format_double(f) + " at byte offset " + std::to_string(at) +
                                    " outside [0, 1]");
            }
        }
    }
    return ds;
}

void write_binary(std::ostream& out, const Dataset& ds, FeatureEncoding encoding) {
    ds.validate();
    io::put_tag(out, "EBMD");
    io::put_u8(out, kDatasetFormatVersion);
    io::put_u8(out, static_cast<std::uint8_t>(encoding));
    io::put_le<std::uint16_t>(out, 0);
    io::put_u32(out, static_cast<std::uint32_t>(ds.dim));
    io::put_u32(out, static_cast<std::uint32_t>(ds.samples.size()));
    io::put_u32(out, static_cast<std::uint32_t>(ds.class_names.size()));
    for (const auto& name : ds.class_names) {
        io::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& s : ds.samples) io::put_u32(out, static_cast<std::uint32_t>(s.label));
    for (const auto& s : ds.samples) io::put_u8(out, s.synthetic ? 1 : 0);
    for (const auto& s : ds.samples) {
        if (encoding == FeatureEncoding::u8) {
            for (double f : s.features) io::put_u8(out, static_cast<std::uint8_t>(std::lround(f * 255.0)));
        } else {
            io::put_f64s(out, s.features);
        }
    }
    if (!out) throw std::runtime_error("write_binary: stream write failed");
}

Dataset load_dataset(const std::string& path, DataFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    try {
        return format == DataFormat::csv ? read_csv(in) : read_binary(in);
    } catch (const FormatError& e) {
        throw DataError(path + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void save_dataset(const std::string& path, const Dataset& ds, DataFormat format, FeatureEncoding encoding) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    if (format == DataFormat::csv)
        write_csv(out, ds);
    else
        write_binary(out, ds, encoding);
}

Split stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("stratified_split: train_fraction must lie in (0, 1)");

    const auto dist = distribution(ds);
    std::vector<std::vector<std::size_t>> real_by_class(dist.counts.size());
    for (std::size_t k = 0; k < ds.samples.size(); ++k)
        if (!ds.samples[k].synthetic) real_by_class[ds.samples[k].label].push_back(k);

    Prng rng(seed);
    std::vector<char> in_train(ds.samples.size(), 0);
    for (std::size_t c = 0; c < real_by_class.size(); ++c) {
        auto& idx = real_by_class[c];
        if (idx.empty()) continue;
        if (idx.size() < 2) {
            const std::string name = c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c);
            throw DataError("stratified_split: class " + std::to_string(c) + " (" + name +
                            ") has fewer than 2 real samples");
        }
        rng.shuffle(idx);
        const double target = std::floor(train_fraction * static_cast<double>(idx.size()) + 0.5);
        const std::size_t take = std::clamp<std::size_t>(static_cast<std::size_t>(target), 1, idx.size() - 1);
        for (std::size_t k = 0; k < take; ++k) in_train[idx[k]] = 1;
    }

    Split out;
    out.train.class_names = out.test.class_names = ds.class_names;
    out.train.dim = out.test.dim = ds.dim;
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        const auto& s = ds.samples[k];
        if (s.synthetic || in_train[k])
            out.train.samples.push_back(s);
        else
            out.test.samples.push_back(s);
    }
    return out;
}

}  // namespace ebm
