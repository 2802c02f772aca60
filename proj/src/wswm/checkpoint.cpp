#include "checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "runconfig.hpp"

namespace wswm {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Section {
    std::uint8_t dtype = 0;
    std::vector<std::uint32_t> dims;
    std::string payload;
};

void append_section(std::string& out, const std::string& name, const Section& s) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(s.dtype));
    out.push_back(static_cast<char>(s.dims.size()));
    for (std::uint32_t d : s.dims) put_u32(out, d);
    out += s.payload;
}

Section tensor_section(const Param& p) {
    Section s;
    s.dtype = 0;
    for (int d : p.dims) s.dims.push_back(static_cast<std::uint32_t>(d));
    s.payload.reserve(p.value.size() * 4);
    const double* data = p.value.data();
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
        put_f32(s.payload, static_cast<float>(data[i]));
    return s;
}

Section text_section(const std::string& text) {
    Section s;
    s.dtype = 1;
    s.dims.push_back(static_cast<std::uint32_t>(text.size()));
    s.payload = text;
    return s;
}

class Reader {
public:
    Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw TruncationError(path_ + ": truncated checkpoint (offset " + std::to_string(pos_) + ")");
    }
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string fmt_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

void fill_param(Param& p, const std::map<std::string, Section>& sections, const std::string& path) {
    auto it = sections.find(p.name);
    if (it == sections.end())
        throw MissingSectionError(path + ": missing section '" + p.name + "'");
    const Section& s = it->second;
    if (s.dtype != 0) throw FormatError(path + ": section '" + p.name + "' is not a tensor");
    std::int64_t count = 1;
    for (std::uint32_t d : s.dims) count *= d;
    if (count != p.value.size())
        throw DimensionError(path + ": section '" + p.name + "' holds " + std::to_string(count) +
                             " values, expected " + std::to_string(p.value.size()));
    const char* raw = s.payload.data();
    double* dst = p.value.data();
    for (std::int64_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(raw[i * 4 + b])) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        dst[i] = static_cast<double>(f);
    }
}

}  // namespace

std::string encode_model_config(const ModelState& state) {
    const ModelSpec& sp = state.spec;
    std::ostringstream out;
    out << "inr_depth = " << sp.inr.depth << "\n";
    out << "inr_width = " << sp.inr.width << "\n";
    out << "inr_channels = " << sp.inr.out_channels << "\n";
    out << "inr_bands = " << sp.inr.fourier_bands << "\n";
    out << "inr_raw_coords = " << (sp.inr.include_raw_coords ? "true" : "false") << "\n";
    out << "action_dim = " << sp.action_dim << "\n";
    out << "frame_h = " << sp.frame_h << "\n";
    out << "frame_w = " << sp.frame_w << "\n";
    out << "frame_c = " << sp.frame_c << "\n";
    out << "enc_channels = ";
    for (std::size_t i = 0; i < sp.enc_channels.size(); ++i)
        out << (i ? "," : "") << sp.enc_channels[i];
    out << "\n";
    out << "enc_kernel = " << sp.enc_kernel << "\n";
    out << "enc_stride = " << sp.enc_stride << "\n";
    out << "enc_proj_scale = " << fmt_double(sp.enc_proj_scale) << "\n";
    out << "idm_width = " << sp.idm_width << "\n";
    out << "idm_depth = " << sp.idm_depth << "\n";
    out << "idm_out_scale = " << fmt_double(sp.idm_out_scale) << "\n";
    out << "fdm_mode = " << (sp.fdm_mode == FdmMode::kAdditive ? "additive" : "joint") << "\n";
    out << "fdm_width = " << sp.fdm_width << "\n";
    out << "fdm_depth = " << sp.fdm_depth << "\n";
    out << "fdm_out_scale = " << fmt_double(sp.fdm_out_scale) << "\n";
    const char* kind = sp.gcm_kind == GcmKind::kGru      ? "gru"
                       : sp.gcm_kind == GcmKind::kLstm   ? "lstm"
                                                         : "transformer";
    out << "gcm_kind = " << kind << "\n";
    out << "gcm_hidden = " << sp.gcm_hidden << "\n";
    out << "gcm_blocks = " << sp.gcm_blocks << "\n";
    out << "gcm_heads = " << sp.gcm_heads << "\n";
    out << "gcm_mlp_ratio = " << sp.gcm_mlp_ratio << "\n";
    out << "gcm_max_t = " << sp.gcm_max_t << "\n";
    out << "gcm_decode_hidden = " << sp.gcm_decode_hidden << "\n";
    out << "use_codebook = " << (sp.use_codebook ? "true" : "false") << "\n";
    out << "codebook_size = " << sp.codebook_size << "\n";
    out << "meta_phase = " << state.meta.phase << "\n";
    out << "meta_step = " << state.meta.step << "\n";
    out << "meta_seed = " << state.meta.seed << "\n";
    out << "components =";
    bool first = true;
    auto add = [&](const char* name) {
        out << (first ? " " : ",") << name;
        first = false;
    };
    if (state.encoder) add("encoder");
    if (state.idm) add("idm");
    if (state.fdm) add("fdm");
    if (state.gcm) add("gcm");
    if (state.codebook) add("codebook");
    if (first) out << " none";
    out << "\n";
    return out.str();
}

void save_checkpoint(const ModelState& state, const std::string& path) {
    std::string body;
    std::uint32_t count = 0;

    auto add_tensor = [&](const Param& p) {
        append_section(body, p.name, tensor_section(p));
        ++count;
    };

    append_section(body, "config", text_section(encode_model_config(state)));
    ++count;
    add_tensor(state.z_base);
    std::vector<Param*> ps;
    ModelState& mut = const_cast<ModelState&>(state);
    if (mut.encoder) mut.encoder->collect(ps);
    if (mut.idm) mut.idm->collect(ps);
    if (mut.fdm) mut.fdm->collect(ps);
    if (mut.gcm) mut.gcm->collect(ps);
    for (Param* p : ps) add_tensor(*p);
    if (state.codebook) {
        Param cb("codebook.vectors",
                 {static_cast<int>(state.codebook->vectors.rows()),
                  static_cast<int>(state.codebook->vectors.cols())},
                 state.codebook->vectors);
        add_tensor(cb);
    }

    std::string out;
    out += "NVCK";
    put_u16(out, 1);
    put_u32(out, count);
    out += body;

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError("cannot open for writing: " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw FormatError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(buf, path);
    std::string magic = r.bytes(4);
    if (magic != "NVCK") throw FormatError(path + ": bad magic (not a checkpoint)");
    std::uint16_t version = r.u16();
    if (version != 1) throw VersionError(path + ": unsupported checkpoint version " + std::to_string(version));
    std::uint32_t count = r.u32();

    std::map<std::string, Section> sections;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = r.u16();
        std::string name = r.bytes(name_len);
        Section s;
        s.dtype = r.u8();
        std::uint8_t rank = r.u8();
        std::int64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            std::uint32_t dim = r.u32();
            s.dims.push_back(dim);
            n *= dim;
        }
        std::size_t bytes = s.dtype == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * 4;
        s.payload = r.bytes(bytes);
        if (sections.count(name)) throw FormatError(path + ": duplicate section '" + name + "'");
        sections[name] = std::move(s);
    }
    if (!r.done()) throw FormatError(path + ": trailing bytes after sections");

    auto cfg_it = sections.find("config");
    if (cfg_it == sections.end()) throw MissingSectionError(path + ": missing section 'config'");
    auto kv = parse_kv_text(cfg_it->second.payload);
    auto need = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(path + ": config lacks key '" + key + "'");
        return it->second;
    };

    ModelSpec sp;
    sp.inr.depth = std::stoi(need("inr_depth"));
    sp.inr.width = std::stoi(need("inr_width"));
    sp.inr.out_channels = std::stoi(need("inr_channels"));
    sp.inr.fourier_bands = std::stoi(need("inr_bands"));
    sp.inr.include_raw_coords = need("inr_raw_coords") == "true";
    sp.action_dim = std::stoi(need("action_dim"));
    sp.frame_h = std::stoi(need("frame_h"));
    sp.frame_w = std::stoi(need("frame_w"));
    sp.frame_c = std::stoi(need("frame_c"));
    {
        sp.enc_channels.clear();
        std::istringstream chs(need("enc_channels"));
        std::string item;
        while (std::getline(chs, item, ',')) sp.enc_channels.push_back(std::stoi(item));
    }
    sp.enc_kernel = std::stoi(need("enc_kernel"));
    sp.enc_stride = std::stoi(need("enc_stride"));
    sp.enc_proj_scale = std::stod(need("enc_proj_scale"));
    sp.idm_width = std::stoi(need("idm_width"));
    sp.idm_depth = std::stoi(need("idm_depth"));
    sp.idm_out_scale = std::stod(need("idm_out_scale"));
    sp.fdm_mode = need("fdm_mode") == "joint" ? FdmMode::kJoint : FdmMode::kAdditive;
    sp.fdm_width = std::stoi(need("fdm_width"));
    sp.fdm_depth = std::stoi(need("fdm_depth"));
    sp.fdm_out_scale = std::stod(need("fdm_out_scale"));
    std::string kind = need("gcm_kind");
    sp.gcm_kind = kind == "gru" ? GcmKind::kGru : kind == "lstm" ? GcmKind::kLstm : GcmKind::kTransformer;
    sp.gcm_hidden = std::stoi(need("gcm_hidden"));
    sp.gcm_blocks = std::stoi(need("gcm_blocks"));
    sp.gcm_heads = std::stoi(need("gcm_heads"));
    sp.gcm_mlp_ratio = std::stoi(need("gcm_mlp_ratio"));
    sp.gcm_max_t = std::stoi(need("gcm_max_t"));
    sp.gcm_decode_hidden = std::stoi(need("gcm_decode_hidden"));
    sp.use_codebook = need("use_codebook") == "true";
    sp.codebook_size = std::stoi(need("codebook_size"));

    ModelState st = make_model(sp, 0);
    st.meta.phase = std::stoi(need("meta_phase"));
    st.meta.step = std::stoll(need("meta_step"));
    st.meta.seed = std::stoull(need("meta_seed"));

    std::string components = need("components");
    auto listed = [&](const std::string& name) {
        std::istringstream cs(components);
        std::string item;
        while (std::getline(cs, item, ',')) {
            if (item == name) return true;
        }
        return false;
    };
    if (listed("encoder")) st.ensure_encoder(0);
    if (listed("idm") || listed("fdm")) st.ensure_dynamics(0);
    if (listed("gcm")) st.ensure_gcm(0);

    fill_param(st.z_base, sections, path);
    std::vector<Param*> ps;
    if (st.encoder) st.encoder->collect(ps);
    if (st.idm) st.idm->collect(ps);
    if (st.fdm) st.fdm->collect(ps);
    if (st.gcm) st.gcm->collect(ps);
    for (Param* p : ps) fill_param(*p, sections, path);
    if (listed("codebook")) {
        st.ensure_codebook(0);
        Param cb("codebook.vectors",
                 {sp.codebook_size, sp.action_dim},
                 Mat::Zero(sp.codebook_size, sp.action_dim));
        fill_param(cb, sections, path);
        st.codebook->vectors = cb.value;
    }
    return st;
}

}  // namespace wswm
