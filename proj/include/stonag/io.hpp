#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stonag {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Round-trip-exact double formatting; every data file goes through this so
/// replayed runs are byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Ordered key = value document with # comments. Keys under "manifest." and
/// the "schema" tag are carried but ignored by the typed getters, so a run
/// manifest can be fed back in as a config file.
class KeyValueConfig {
public:
    static KeyValueConfig from_string(const std::string& text) {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.set(key, value);
        }
        return cfg;
    }

    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream body;
        body << in.rdbuf();
        return from_string(body.str());
    }

    void set(const std::string& key, const std::string& value) {
        if (values_.find(key) == values_.end()) order_.push_back(key);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw ConfigError("");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': not an integer: " + it->second);
        }
    }

    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::string item;
        std::istringstream in(it->second);
        while (std::getline(in, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            out.push_back(parse_double(key, t));
        }
        return out;
    }

    /// Keys that are neither recognized nor manifest metadata.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
        std::vector<std::string> out;
        for (const std::string& key : order_) {
            if (key.rfind("manifest.", 0) == 0 || key == "schema") continue;
            bool ok = false;
            for (const std::string& k : known)
                if (k == key) { ok = true; break; }
            if (!ok) out.push_back(key);
        }
        return out;
    }

    const std::vector<std::string>& keys() const { return order_; }

    std::string serialize() const {
        std::ostringstream out;
        for (const std::string& key : order_) out << key << " = " << values_.at(key) << "\n";
        return out.str();
    }

private:
    static std::string trim(const std::string& s) {
        const char* ws = " \t\r\n";
        const std::size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return "";
        const std::size_t b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    }

    static double parse_double(const std::string& key, const std::string& text) {
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw ConfigError("");
            return v;
        } catch (...) {
            throw ConfigError("config key '" + key + "': not a number: " + text);
        }
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

/// Whitespace-separated numeric columns under a schema/header comment.
class ColumnarWriter {
public:
    ColumnarWriter(const std::string& schema, const std::vector<std::string>& columns) {
        body_ << "# schema: " << schema << "\n# columns:";
        for (const std::string& c : columns) body_ << ' ' << c;
        body_ << "\n";
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ << ' ';
            body_ << format_double(values[i]);
        }
        body_ << "\n";
    }

    std::string str() const { return body_.str(); }

private:
    std::ostringstream body_;
};

/// Structured text report: schema tag followed by key: value lines.
class ReportWriter {
public:
    explicit ReportWriter(const std::string& schema) { body_ << "schema: " << schema << "\n"; }

    void kv(const std::string& key, const std::string& value) { body_ << key << ": " << value << "\n"; }
    void kv(const std::string& key, double value) { kv(key, format_double(value)); }
    void kv(const std::string& key, long long value) { kv(key, std::to_string(value)); }
    void blank() { body_ << "\n"; }
    void line(const std::string& raw) { body_ << raw << "\n"; }

    std::string str() const { return body_.str(); }

private:
    std::ostringstream body_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    out << content;
}

/// Run manifest: the fully resolved configuration plus run metadata. The
/// config block is plain key = value, so the manifest itself replays as a
/// config file (manifest.* keys are ignored on load).
struct Manifest {
    std::string subcommand;
    std::string version;
    std::uint64_t master_seed = 0;
    KeyValueConfig resolved;
    std::vector<std::string> outputs;
    double duration_s = 0.0;
    unsigned threads = 1;

    std::string serialize() const {
        std::ostringstream out;
        out << "schema = stonag-manifest-v1\n";
        out << "manifest.subcommand = " << subcommand << "\n";
        out << "manifest.version = " << version << "\n";
        out << "manifest.master_seed = " << master_seed << "\n";
        out << "manifest.threads = " << threads << "\n";
        out << "manifest.duration_s = " << format_double(duration_s) << "\n";
        std::string files;
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            if (i) files += ",";
            files += outputs[i];
        }
        out << "manifest.outputs = " << files << "\n";
        out << resolved.serialize();
        return out.str();
    }
};

}
