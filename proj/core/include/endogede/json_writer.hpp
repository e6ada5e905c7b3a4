#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace endogede {

// Deterministic JSON output: object keys keep insertion order and floats are
// printed with exactly 9 significant digits, so identical reports are
// byte-identical across runs. Parsing of inputs uses nlohmann/json instead.
class Json {
public:
    enum class Kind { Null, Bool, Int, Real, Str, Array, Object };

    Json() : kind_(Kind::Null) {}
    Json(bool b) : kind_(Kind::Bool), bool_(b) {}
    Json(int v) : kind_(Kind::Int), int_(v) {}
    Json(long long v) : kind_(Kind::Int), int_(v) {}
    Json(size_t v) : kind_(Kind::Int), int_(static_cast<long long>(v)) {}
    Json(double v) : kind_(Kind::Real), real_(v) {}
    Json(const char* s) : kind_(Kind::Str), str_(s) {}
    Json(std::string s) : kind_(Kind::Str), str_(std::move(s)) {}

    static Json array();
    static Json object();

    Json& push(Json v);                      // array append
    Json& set(const std::string& key, Json v);  // object insert (ordered)

    bool is_object() const { return kind_ == Kind::Object; }
    bool is_array() const { return kind_ == Kind::Array; }

    std::string dump(int indent = 0) const;

private:
    Kind kind_;
    bool bool_ = false;
    long long int_ = 0;
    double real_ = 0.0;
    std::string str_;
    std::vector<Json> arr_;
    std::vector<std::pair<std::string, Json>> obj_;

    void emit(std::string& out, int indent, int depth) const;
};

void write_text_file(const std::string& path, const std::string& content);

} // namespace endogede
