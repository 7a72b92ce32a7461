#include "pemux/model_io.hpp"

#include <cstring>
#include <fstream>

namespace pemux {

namespace {

// Append-only byte sink and a cursor-based reader; every multi-byte value is
// little-endian, doubles go through their IEEE-754 bit pattern.
struct Writer {
    std::string buf;

    void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf += s;
    }
    void f64_vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
};

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw Error(Errc::DataError, "model file truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<double> f64_vec() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (std::uint64_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
};

void write_svm(Writer& w, const SvmModel& model) {
    w.u32(static_cast<std::uint32_t>(model.num_classes));
    const SvmConfig& cfg = model.machines.empty() ? SvmConfig{} : model.machines[0].config;
    w.u8(static_cast<std::uint8_t>(cfg.kernel));
    w.f64(cfg.C);
    w.f64(cfg.gamma);
    for (const BinarySvm& m : model.machines) {
        w.u32(static_cast<std::uint32_t>(m.support_vectors.rows));
        w.u32(static_cast<std::uint32_t>(m.support_vectors.cols));
        w.f64(m.bias);
        w.f64(m.platt_a);
        w.f64(m.platt_b);
        w.f64_vec(m.coeffs);
        w.f64_vec(m.support_vectors.data);
    }
}

SvmModel read_svm(Reader& r) {
    SvmModel model;
    model.num_classes = r.u32();
    SvmConfig cfg;
    cfg.kernel = static_cast<KernelKind>(r.u8());
    cfg.C = r.f64();
    cfg.gamma = r.f64();
    model.machines.resize(model.num_classes);
    for (BinarySvm& m : model.machines) {
        m.config = cfg;
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        m.bias = r.f64();
        m.platt_a = r.f64();
        m.platt_b = r.f64();
        m.coeffs = r.f64_vec();
        m.support_vectors.rows = rows;
        m.support_vectors.cols = cols;
        m.support_vectors.data = r.f64_vec();
        if (m.support_vectors.data.size() != static_cast<std::size_t>(rows) * cols ||
            m.coeffs.size() != rows)
            throw Error(Errc::DataError, "model file: inconsistent SVM machine sizes");
    }
    return model;
}

void write_lstm(Writer& w, const LstmWeights& model) {
    w.u32(static_cast<std::uint32_t>(model.cfg.hidden));
    w.u32(static_cast<std::uint32_t>(model.cfg.classes));
    w.u32(static_cast<std::uint32_t>(model.cfg.seq_len));
    w.f64_vec(model.flat);
}

LstmWeights read_lstm(Reader& r) {
    LstmWeights model;
    model.cfg.hidden = r.u32();
    model.cfg.classes = r.u32();
    model.cfg.seq_len = r.u32();
    model.flat = r.f64_vec();
    if (model.flat.size() != model.param_count())
        throw Error(Errc::DataError, "model file: LSTM parameter count mismatch");
    return model;
}

void write_cnn(Writer& w, const CnnWeights& model) {
    w.u32(static_cast<std::uint32_t>(model.arch.side));
    w.u32(static_cast<std::uint32_t>(model.arch.filters));
    w.u32(static_cast<std::uint32_t>(model.arch.dense1));
    w.u32(static_cast<std::uint32_t>(model.arch.classes));
    w.f64_vec(model.flat);
}

CnnWeights read_cnn(Reader& r) {
    CnnWeights model;
    model.arch.side = r.u32();
    model.arch.filters = r.u32();
    model.arch.dense1 = r.u32();
    model.arch.classes = r.u32();
    model.flat = r.f64_vec();
    if (model.flat.size() != model.total_params())
        throw Error(Errc::DataError, "model file: CNN parameter count mismatch");
    return model;
}

void write_region_payload(Writer& w, const RegionModel& model) {
    w.u8(static_cast<std::uint8_t>(model.kind));
    w.u8(static_cast<std::uint8_t>(model.region));
    w.u8(static_cast<std::uint8_t>(model.smode));
    w.u32(static_cast<std::uint32_t>(model.seq_len));
    w.u32(static_cast<std::uint32_t>(model.labels.size()));
    for (const std::string& s : model.labels) w.str(s);
    switch (model.kind) {
        case ModelKind::Svm: write_svm(w, std::get<SvmModel>(model.model)); break;
        case ModelKind::Lstm: write_lstm(w, std::get<LstmWeights>(model.model)); break;
        case ModelKind::Cnn: write_cnn(w, std::get<CnnWeights>(model.model)); break;
    }
}

RegionModel read_region_payload(Reader& r) {
    RegionModel model;
    const std::uint8_t kind = r.u8();
    if (kind > 2) throw Error(Errc::DataError, "model file: bad model kind");
    model.kind = static_cast<ModelKind>(kind);
    const std::uint8_t region = r.u8();
    if (region > 2) throw Error(Errc::DataError, "model file: bad region");
    model.region = static_cast<Region>(region);
    model.smode = static_cast<SectionsMode>(r.u8() != 0);
    model.seq_len = r.u32();
    const std::uint32_t n_labels = r.u32();
    for (std::uint32_t i = 0; i < n_labels; ++i) model.labels.push_back(r.str());
    switch (model.kind) {
        case ModelKind::Svm: model.model = read_svm(r); break;
        case ModelKind::Lstm: model.model = read_lstm(r); break;
        case ModelKind::Cnn: model.model = read_cnn(r); break;
    }
    return model;
}

void write_file(const std::string& path, const std::string& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open model file for writing: " + path);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(Errc::IoError, "failed writing model file: " + path);
}

std::uint32_t tag_for(const RegionModel& model) {
    switch (model.kind) {
        case ModelKind::Svm: return 1;
        case ModelKind::Lstm: return 2;
        case ModelKind::Cnn: return 3;
    }
    return 1;
}

}  // namespace

void save_region_model(const RegionModel& model, const std::string& path) {
    Writer w;
    w.u32(kModelMagic);
    w.u32(kModelVersion);
    w.u32(tag_for(model));
    write_region_payload(w, model);
    write_file(path, w.buf);
}

void save_fusion_model(const FusionModel& model, const std::string& path) {
    Writer w;
    w.u32(kModelMagic);
    w.u32(kModelVersion);
    w.u32(4);
    w.u32(static_cast<std::uint32_t>(model.labels.size()));
    for (const std::string& s : model.labels) w.str(s);
    write_region_payload(w, model.header);
    write_region_payload(w, model.sections);
    write_svm(w, model.classifier);
    write_file(path, w.buf);
}

AnyModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open model file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{buf};
    if (r.u32() != kModelMagic) throw Error(Errc::DataError, "not a model file: " + path);
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw Error(Errc::DataError, "unsupported model version " + std::to_string(version));
    const std::uint32_t tag = r.u32();
    if (tag >= 1 && tag <= 3) {
        RegionModel model = read_region_payload(r);
        return model;
    }
    if (tag == 4) {
        FusionModel model;
        const std::uint32_t n_labels = r.u32();
        for (std::uint32_t i = 0; i < n_labels; ++i) model.labels.push_back(r.str());
        model.header = read_region_payload(r);
        model.sections = read_region_payload(r);
        model.classifier = read_svm(r);
        return model;
    }
    throw Error(Errc::DataError, "unknown model type tag " + std::to_string(tag));
}

}  // namespace pemux
