#include "opf/harness/matrix_expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace opf::harness {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Matrix parse() {
        Matrix value = expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return value;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << what << " at column " << (pos_ + 1) << " in '" << text_ << "'";
        throw ConfigError(os.str());
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    static bool is_scalar(const Matrix& M) { return M.rows() == 1 && M.cols() == 1; }

    Matrix add(const Matrix& a, const Matrix& b, double sign) {
        if (is_scalar(b) && !is_scalar(a)) return (a.array() + sign * b(0, 0)).matrix();
        if (is_scalar(a) && !is_scalar(b)) return (sign * b.array() + a(0, 0)).matrix();
        if (a.rows() != b.rows() || a.cols() != b.cols()) fail("shape mismatch in sum");
        return a + sign * b;
    }

    Matrix multiply(const Matrix& a, const Matrix& b) {
        if (is_scalar(a)) return a(0, 0) * b;
        if (is_scalar(b)) return b(0, 0) * a;
        if (a.cols() != b.rows()) fail("shape mismatch in product");
        return a * b;
    }

    Matrix expr() {
        Matrix value = term();
        for (;;) {
            if (accept('+')) value = add(value, term(), 1.0);
            else if (accept('-')) value = add(value, term(), -1.0);
            else return value;
        }
    }

    Matrix term() {
        Matrix value = unary();
        while (accept('*')) value = multiply(value, unary());
        return value;
    }

    Matrix unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return primary();
    }

    Matrix primary() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            Matrix value = expr();
            expect(')');
            return value;
        }
        if (c == '[') return literal();
        if (std::isalpha(static_cast<unsigned char>(c))) return call();
        return Matrix::Constant(1, 1, number());
    }

    double number() {
        skip_space();
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin) fail("expected a number");
        pos_ += static_cast<std::size_t>(ptr - begin);
        return value;
    }

    // Entries until ']' or ';', separated by commas or blanks. Each entry is a
    // signed number.
    std::vector<double> row_entries() {
        std::vector<double> row;
        for (;;) {
            const char c = peek();
            if (c == ']' || c == ';' || c == '\0') break;
            if (c == ',') {
                ++pos_;
                continue;
            }
            double sign = 1.0;
            while (peek() == '-' || peek() == '+') {
                if (text_[pos_] == '-') sign = -sign;
                ++pos_;
            }
            row.push_back(sign * number());
        }
        return row;
    }

    Matrix literal() {
        expect('[');
        std::vector<std::vector<double>> rows;
        if (peek() == '[') {
            do {
                expect('[');
                rows.push_back(row_entries());
                expect(']');
            } while (accept(','));
        } else {
            do rows.push_back(row_entries());
            while (accept(';'));
        }
        expect(']');
        if (rows.empty() || rows.front().empty()) fail("empty matrix literal");
        const auto cols = rows.front().size();
        Matrix M(rows.size(), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != cols) fail("ragged matrix literal");
            for (std::size_t j = 0; j < cols; ++j) M(i, j) = rows[i][j];
        }
        return M;
    }

    Eigen::Index dimension(const Matrix& M) {
        if (!is_scalar(M) || M(0, 0) < 1 || M(0, 0) != std::floor(M(0, 0))) fail("expected a positive integer size");
        return static_cast<Eigen::Index>(M(0, 0));
    }

    Matrix call() {
        const auto start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        const std::string name(text_.substr(start, pos_ - start));
        expect('(');
        std::vector<Matrix> args;
        if (peek() != ')') {
            do args.push_back(expr());
            while (accept(','));
        }
        expect(')');
        auto arity = [&](std::size_t lo, std::size_t hi) {
            if (args.size() < lo || args.size() > hi) fail("wrong number of arguments to " + name);
        };
        if (name == "kron") {
            arity(2, 2);
            const Matrix& a = args[0];
            const Matrix& b = args[1];
            Matrix K(a.rows() * b.rows(), a.cols() * b.cols());
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                for (Eigen::Index j = 0; j < a.cols(); ++j) K.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
            return K;
        }
        if (name == "eye") {
            arity(1, 1);
            const auto n = dimension(args[0]);
            return Matrix::Identity(n, n);
        }
        if (name == "zeros" || name == "ones") {
            arity(1, 2);
            const auto r = dimension(args[0]);
            const auto c = args.size() == 2 ? dimension(args[1]) : r;
            return Matrix::Constant(r, c, name == "ones" ? 1.0 : 0.0);
        }
        if (name == "diag") {
            arity(1, 1);
            const Matrix& v = args[0];
            if (v.rows() != 1 && v.cols() != 1) fail("diag expects a vector");
            Vector d = Eigen::Map<const Vector>(v.data(), v.size());
            return d.asDiagonal();
        }
        pos_ = start;
        fail("unknown function '" + name + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Matrix parse_matrix_expr(std::string_view text) {
    return Parser(text).parse();
}

std::string format_matrix(const Matrix& M) {
    std::string out = "[";
    char buf[32];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        if (i) out += "; ";
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out += ", ";
            const auto res = std::to_chars(buf, buf + sizeof buf, M(i, j));
            out.append(buf, res.ptr);
        }
    }
    return out + "]";
}

}  // namespace opf::harness
