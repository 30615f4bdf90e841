#pragma once

#include <memory>
#include <string>
#include <vector>

#include "driftfit/drift.hpp"
#include "driftfit/types.hpp"

namespace driftfit::harness {

/// A scalar expression over variables x1..xd with + - * / ^, unary minus and
/// the functions sin, cos, exp. Immutable once parsed.
class Expression {
public:
    /// Parses `text` against dimension `dim`. Applies the usual precedence
    /// (^ above unary minus above * / above + -), left associativity for
    /// + - * / and right associativity for ^. Errors carry a byte offset.
    static Expression parse(const std::string& text, int dim);

    double eval(const Vector& x) const;
    int dim() const { return dim_; }

    /// Fully parenthesized rendering; parsing it back yields an equal tree.
    std::string str() const;

    /// Structural tree equality.
    bool equals(const Expression& other) const;

    struct Node;

private:
    Expression(std::shared_ptr<const Node> root, int dim) : root_(std::move(root)), dim_(dim) {}

    std::shared_ptr<const Node> root_;
    int dim_;
};

/// Builds a drift field from one expression per output dimension; the state
/// dimension equals the number of expressions.
dynamics::DriftPtr expression_drift(const std::vector<std::string>& expressions);

} // namespace driftfit::harness
