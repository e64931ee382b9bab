#include "d2c/cli/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "d2c/numcore/errors.hpp"

namespace d2c::cli {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool is_bare_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

class LineParser {
public:
    LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    TomlValue value() {
        skip_ws();
        if (peek() == '"') return string();
        if (peek() == '[') return array();
        std::string tok;
        while (pos_ < s_.size() && s_[pos_] != '#' && s_[pos_] != ',' && s_[pos_] != ']' &&
               !std::isspace(static_cast<unsigned char>(s_[pos_])))
            tok += s_[pos_++];
        if (tok == "true") return true;
        if (tok == "false") return false;
        return number(tok);
    }

    void finish() {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected text after value");
    }

private:
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("line " + std::to_string(line_) + ": " + msg);
    }

    std::string string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("unterminated escape");
                const char e = s_[pos_++];
                switch (e) {
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::vector<std::string> array() {
        ++pos_;
        std::vector<std::string> out;
        skip_ws();
        if (peek() == ']') {
            ++pos_;
            return out;
        }
        for (;;) {
            skip_ws();
            if (peek() != '"') fail("arrays may only hold strings");
            out.push_back(string());
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
                if (peek() == ']') {
                    ++pos_;
                    return out;
                }
                continue;
            }
            if (peek() == ']') {
                ++pos_;
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }

    TomlValue number(const std::string& tok) {
        if (tok.empty()) fail("missing value");
        std::string clean;
        for (char c : tok)
            if (c != '_') clean += c;
        const bool floating = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                              clean == "+inf" || clean == "-inf" || clean == "nan";
        if (!floating) {
            std::int64_t v = 0;
            const char* b = clean.data() + (clean[0] == '+' ? 1 : 0);
            auto [p, ec] = std::from_chars(b, clean.data() + clean.size(), v);
            if (ec != std::errc() || p != clean.data() + clean.size()) fail("bad value '" + tok + "'");
            return v;
        }
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(clean.c_str(), &end);
        if (end != clean.c_str() + clean.size() || errno == ERANGE) fail("bad number '" + tok + "'");
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

// Typed, tracked access to one section; unknown keys are reported at the end.
class Section {
public:
    Section(const TomlTable& t, const std::string& name) : name_(name) {
        auto it = t.find(name);
        if (it != t.end()) values_ = &it->second;
    }

    void real(const std::string& key, double& out) {
        if (auto v = find(key)) {
            if (auto d = std::get_if<double>(v)) out = *d;
            else if (auto i = std::get_if<std::int64_t>(v)) out = static_cast<double>(*i);
            else type_error(key, "a number");
        }
    }
    void count(const std::string& key, std::size_t& out) {
        if (auto v = find(key)) {
            auto i = std::get_if<std::int64_t>(v);
            if (!i || *i < 0) type_error(key, "a nonnegative integer");
            out = static_cast<std::size_t>(*i);
        }
    }
    void seed(const std::string& key, std::uint64_t& out) {
        std::size_t v = out;
        count(key, v);
        out = v;
    }
    void text(const std::string& key, std::string& out) {
        if (auto v = find(key)) {
            auto s = std::get_if<std::string>(v);
            if (!s) type_error(key, "a string");
            out = *s;
        }
    }
    void list(const std::string& key, std::vector<std::string>& out, bool& present) {
        present = false;
        if (auto v = find(key)) {
            auto s = std::get_if<std::vector<std::string>>(v);
            if (!s) type_error(key, "an array of strings");
            out = *s;
            present = true;
        }
    }

    void reject_unknown() const {
        if (!values_) return;
        for (const auto& [k, v] : *values_)
            if (!used_.contains(k)) throw ConfigError("unknown key '" + k + "' in [" + name_ + "]");
    }

private:
    const TomlValue* find(const std::string& key) {
        used_.insert(key);
        if (!values_) return nullptr;
        auto it = values_->find(key);
        return it == values_->end() ? nullptr : &it->second;
    }
    [[noreturn]] void type_error(const std::string& key, const char* what) const {
        throw ConfigError("[" + name_ + "] " + key + " must be " + what);
    }

    std::string name_;
    const std::map<std::string, TomlValue>* values_ = nullptr;
    std::set<std::string> used_;
};

void read_stage(Section& s, train::StageConfig& st) {
    s.real("lambda", st.lambda);
    s.real("lr", st.lr);
    s.count("epochs", st.epochs);
    s.count("batch_size", st.batch_size);
    s.count("max_steps", st.max_steps);
    std::string schedule = train::to_string(st.schedule);
    s.text("schedule", schedule);
    try {
        st.schedule = train::parse_lr_schedule(schedule);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    std::vector<std::string> groups;
    bool present = false;
    s.list("groups", groups, present);
    if (present) {
        st.trainable.clear();
        for (const auto& g : groups) {
            auto parsed = parse_group(g);
            if (!parsed) throw ConfigError("unknown parameter group '" + g + "'");
            st.trainable.insert(*parsed);
        }
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

void write_stage(std::ostringstream& o, const std::string& name, const train::StageConfig& st) {
    o << "\n[" << name << "]\n";
    o << "lambda = " << fmt(st.lambda) << "\n";
    o << "lr = " << fmt(st.lr) << "\n";
    o << "epochs = " << st.epochs << "\n";
    o << "batch_size = " << st.batch_size << "\n";
    o << "max_steps = " << st.max_steps << "\n";
    o << "schedule = " << quote(train::to_string(st.schedule)) << "\n";
    o << "groups = [";
    bool first = true;
    for (auto g : st.trainable) {
        o << (first ? "" : ", ") << quote(std::string(to_string(g)));
        first = false;
    }
    o << "]\n";
}

} // namespace

TomlTable parse_toml(std::string_view text) {
    TomlTable out;
    std::string section;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view raw = text.substr(start, end - start);
        start = end + 1;
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') {
            if (end == text.size()) break;
            continue;
        }
        if (line[0] == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            const std::string rest = trim(std::string_view(line).substr(close + 1));
            if (!rest.empty() && rest[0] != '#') throw ConfigError("line " + std::to_string(lineno) + ": text after section");
            section = trim(std::string_view(line).substr(1, close - 1));
            if (!is_bare_key(section)) throw ConfigError("line " + std::to_string(lineno) + ": bad section name");
            if (out.contains(section)) throw ConfigError("duplicate section [" + section + "]");
            out[section];
        } else {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(std::string_view(line).substr(0, eq));
            if (!is_bare_key(key)) throw ConfigError("line " + std::to_string(lineno) + ": bad key '" + key + "'");
            if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside a section");
            LineParser p(std::string_view(line).substr(eq + 1), lineno);
            TomlValue v = p.value();
            p.finish();
            if (!out[section].emplace(key, std::move(v)).second) {
                throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
            }
        }
        if (end == text.size()) break;
    }
    return out;
}

void ExperimentConfig::validate() const {
    try {
        model.validate();
        synth.validate();
        stage1.validate();
        stage2.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (synth.width != model.width) throw ConfigError("[synth] width must equal [model] width");
    if (synth.scales != model.scales) throw ConfigError("[synth] scales must equal [model] scales");
    if (synth.vocab_size != model.vocab) throw ConfigError("[synth] vocab_size must equal [model] vocab");
    if (train_samples == 0 || heldout_samples == 0) throw ConfigError("sample counts must be positive");
    if (!(gradcheck.eps >= 1e-7 && gradcheck.eps <= 1e-4)) throw ConfigError("[gradcheck] eps must lie in [1e-7, 1e-4]");
    if (gradcheck.samples == 0) throw ConfigError("[gradcheck] samples must be positive");
    if (gradcheck.side == 0 || gradcheck.side % mfe::required_divisor(model.scales) != 0) {
        throw ConfigError("[gradcheck] side must be divisible by " + std::to_string(mfe::required_divisor(model.scales)));
    }
    const std::size_t longest = synth.side * synth.side + 4;
    if (model.lm.max_seq_len < longest) {
        throw ConfigError("[model] max_seq_len must be at least " + std::to_string(longest));
    }
    if (out.empty()) throw ConfigError("[run] out must not be empty");
    if (!(stage1.adam == stage2.adam)) throw ConfigError("both stages must share the optimizer settings");
}

void ExperimentConfig::set_seed(std::uint64_t value) {
    seed = value;
    stage1.seed = value + 3;
    stage2.seed = value + 4;
}

ExperimentConfig config_from_table(const TomlTable& table) {
    static const std::set<std::string> known{"model", "synth", "semantic", "stage1", "stage2",
                                             "optimizer", "gradcheck", "run"};
    for (const auto& [name, _] : table)
        if (!known.contains(name)) throw ConfigError("unknown section [" + name + "]");

    ExperimentConfig c;
    Section m(table, "model");
    m.count("width", c.model.width);
    m.count("scales", c.model.scales);
    m.count("vocab", c.model.vocab);
    m.count("text_hidden", c.model.text_hidden);
    m.count("text_depth", c.model.text_depth);
    m.real("embedding_scale", c.model.embedding_scale);
    m.count("fusion_layers", c.model.fusion.layers);
    m.count("fusion_heads", c.model.fusion.heads);
    m.count("fusion_ffn", c.model.fusion.ffn_width);
    m.count("lm_layers", c.model.lm.layers);
    m.count("lm_heads", c.model.lm.heads);
    m.count("lm_ffn", c.model.lm.ffn_width);
    m.count("max_seq_len", c.model.lm.max_seq_len);
    m.real("beta_init", c.model.beta_init);
    m.reject_unknown();
    c.model.fusion.width = c.model.width;

    Section s(table, "synth");
    c.synth.width = c.model.width;
    c.synth.scales = c.model.scales;
    c.synth.vocab_size = c.model.vocab;
    s.count("side", c.synth.side);
    s.count("classes", c.synth.classes);
    s.real("noise", c.synth.noise);
    s.real("closed_fraction", c.synth.closed_fraction);
    s.seed("codebook_seed", c.synth.codebook_seed);
    s.count("train_samples", c.train_samples);
    s.count("heldout_samples", c.heldout_samples);
    s.reject_unknown();

    Section sem(table, "semantic");
    sem.real("tau", c.model.tau);
    sem.count("queue_size", c.synth.caption_pool);
    sem.reject_unknown();

    Section s1(table, "stage1");
    read_stage(s1, c.stage1);
    s1.reject_unknown();
    Section s2(table, "stage2");
    read_stage(s2, c.stage2);
    s2.reject_unknown();

    Section o(table, "optimizer");
    train::AdamWConfig adam;
    o.real("beta1", adam.beta1);
    o.real("beta2", adam.beta2);
    o.real("eps", adam.eps);
    o.real("weight_decay", adam.weight_decay);
    o.reject_unknown();
    c.stage1.adam = adam;
    c.stage2.adam = adam;

    Section g(table, "gradcheck");
    g.real("eps", c.gradcheck.eps);
    g.count("side", c.gradcheck.side);
    g.count("samples", c.gradcheck.samples);
    g.text("corrupt", c.gradcheck.corrupt);
    g.reject_unknown();

    Section r(table, "run");
    std::uint64_t seed = 0;
    r.seed("seed", seed);
    r.text("out", c.out);
    r.reject_unknown();
    c.set_seed(seed);

    c.validate();
    return c;
}

ExperimentConfig parse_config(std::string_view text) { return config_from_table(parse_toml(text)); }

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[model]\n";
    o << "width = " << c.model.width << "\n";
    o << "scales = " << c.model.scales << "\n";
    o << "vocab = " << c.model.vocab << "\n";
    o << "text_hidden = " << c.model.text_hidden << "\n";
    o << "text_depth = " << c.model.text_depth << "\n";
    o << "embedding_scale = " << fmt(c.model.embedding_scale) << "\n";
    o << "fusion_layers = " << c.model.fusion.layers << "\n";
    o << "fusion_heads = " << c.model.fusion.heads << "\n";
    o << "fusion_ffn = " << c.model.fusion.ffn_width << "\n";
    o << "lm_layers = " << c.model.lm.layers << "\n";
    o << "lm_heads = " << c.model.lm.heads << "\n";
    o << "lm_ffn = " << c.model.lm.ffn_width << "\n";
    o << "max_seq_len = " << c.model.lm.max_seq_len << "\n";
    o << "beta_init = " << fmt(c.model.beta_init) << "\n";

    o << "\n[synth]\n";
    o << "side = " << c.synth.side << "\n";
    o << "classes = " << c.synth.classes << "\n";
    o << "noise = " << fmt(c.synth.noise) << "\n";
    o << "closed_fraction = " << fmt(c.synth.closed_fraction) << "\n";
    o << "codebook_seed = " << c.synth.codebook_seed << "\n";
    o << "train_samples = " << c.train_samples << "\n";
    o << "heldout_samples = " << c.heldout_samples << "\n";

    o << "\n[semantic]\n";
    o << "tau = " << fmt(c.model.tau) << "\n";
    o << "queue_size = " << c.synth.caption_pool << "\n";

    write_stage(o, "stage1", c.stage1);
    write_stage(o, "stage2", c.stage2);

    o << "\n[optimizer]\n";
    o << "beta1 = " << fmt(c.stage1.adam.beta1) << "\n";
    o << "beta2 = " << fmt(c.stage1.adam.beta2) << "\n";
    o << "eps = " << fmt(c.stage1.adam.eps) << "\n";
    o << "weight_decay = " << fmt(c.stage1.adam.weight_decay) << "\n";

    o << "\n[gradcheck]\n";
    o << "eps = " << fmt(c.gradcheck.eps) << "\n";
    o << "side = " << c.gradcheck.side << "\n";
    o << "samples = " << c.gradcheck.samples << "\n";
    o << "corrupt = " << quote(c.gradcheck.corrupt) << "\n";

    o << "\n[run]\n";
    o << "seed = " << c.seed << "\n";
    o << "out = " << quote(c.out) << "\n";
    return o.str();
}

} // namespace d2c::cli
