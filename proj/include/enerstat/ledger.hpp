// Exact integer energy accounting. One free pool plus per-structure trapped
// and buffer accounts; every movement goes through transfer() so conservation
// has a single choke point. Account id 0 is the environment's trapped store.
#pragma once

#include <map>
#include <string>

#include "enerstat/base.hpp"

namespace enerstat {

enum class AccountKind { FreePool, Trapped, Buffer, External };

struct AccountRef {
    AccountKind kind = AccountKind::FreePool;
    InstanceId id = 0;  // meaningful for Trapped/Buffer

    static AccountRef pool() { return {AccountKind::FreePool, 0}; }
    static AccountRef trapped(InstanceId id) { return {AccountKind::Trapped, id}; }
    static AccountRef buffer(InstanceId id) { return {AccountKind::Buffer, id}; }
    // Outside the world entirely; used for open-mode inflow/outflow only.
    static AccountRef external() { return {AccountKind::External, 0}; }

    bool operator==(const AccountRef&) const = default;
};

inline std::string account_name(const AccountRef& acc) {
    switch (acc.kind) {
        case AccountKind::FreePool: return "pool";
        case AccountKind::Trapped:
            return acc.id == kEnvAccount ? "trapped:env" : "trapped:" + std::to_string(acc.id);
        case AccountKind::Buffer: return "buffer:" + std::to_string(acc.id);
        case AccountKind::External: return "external";
    }
    return "?";
}

class Ledger {
public:
    Ledger() { open(kEnvAccount); }
    explicit Ledger(Energy total) : free_pool_(total), total_(total) { open(kEnvAccount); }

    Energy free_pool() const { return free_pool_; }
    Energy total() const { return total_; }

    // Registers trapped/buffer accounts for an instance (idempotent).
    void open(InstanceId id) {
        trapped_.try_emplace(id, 0);
        buffer_.try_emplace(id, 0);
    }

    bool knows(InstanceId id) const { return trapped_.count(id) != 0; }

    Energy trapped(InstanceId id) const { return lookup(trapped_, id); }
    Energy buffer(InstanceId id) const { return lookup(buffer_, id); }
    const std::map<InstanceId, Energy>& trapped_accounts() const { return trapped_; }
    const std::map<InstanceId, Energy>& buffer_accounts() const { return buffer_; }

    Energy balance(const AccountRef& acc) const {
        switch (acc.kind) {
            case AccountKind::FreePool: return free_pool_;
            case AccountKind::Trapped: return trapped(acc.id);
            case AccountKind::Buffer: return buffer(acc.id);
            case AccountKind::External: return std::numeric_limits<Energy>::max();
        }
        return 0;
    }

    // Moves exactly `amount` (>= 0) or throws; partial transfers never happen.
    // Transfers touching an External endpoint change total() and are only
    // legal in open worlds (the engine logs them as inflow/outflow).
    void transfer(const AccountRef& from, const AccountRef& to, Energy amount) {
        if (amount < 0) raise(Errc::InsufficientBalance, "negative transfer amount");
        check_known(from);
        check_known(to);
        if (amount == 0) return;
        if (from.kind != AccountKind::External && balance(from) < amount)
            raise(Errc::InsufficientBalance,
                  account_name(from) + " holds " + std::to_string(balance(from)) +
                      ", needs " + std::to_string(amount));
        debit(from, amount);
        credit(to, amount);
    }

    // Drops the accounts of a dead instance. Balances must already be zero.
    void forget(InstanceId id) {
        if (trapped(id) != 0 || buffer(id) != 0)
            raise(Errc::ConservationViolation,
                  "forgetting instance " + std::to_string(id) + " with nonzero balance");
        trapped_.erase(id);
        buffer_.erase(id);
    }

    // free_pool + sum(trapped) + sum(buffer) == total, and nothing negative.
    bool audit() const {
        Energy sum = free_pool_;
        if (free_pool_ < 0) return false;
        for (const auto& [id, v] : trapped_) {
            if (v < 0) return false;
            sum += v;
        }
        for (const auto& [id, v] : buffer_) {
            if (v < 0) return false;
            sum += v;
        }
        return sum == total_;
    }

private:
    static Energy lookup(const std::map<InstanceId, Energy>& m, InstanceId id) {
        auto it = m.find(id);
        return it == m.end() ? 0 : it->second;
    }

    void check_known(const AccountRef& acc) const {
        if ((acc.kind == AccountKind::Trapped || acc.kind == AccountKind::Buffer) && !knows(acc.id))
            raise(Errc::UnknownAccount, account_name(acc));
    }

    void debit(const AccountRef& acc, Energy amount) {
        switch (acc.kind) {
            case AccountKind::FreePool: free_pool_ -= amount; break;
            case AccountKind::Trapped: trapped_[acc.id] -= amount; break;
            case AccountKind::Buffer: buffer_[acc.id] -= amount; break;
            case AccountKind::External: total_ += amount; break;  // inflow
        }
    }

    void credit(const AccountRef& acc, Energy amount) {
        switch (acc.kind) {
            case AccountKind::FreePool: free_pool_ += amount; break;
            case AccountKind::Trapped: trapped_[acc.id] += amount; break;
            case AccountKind::Buffer: buffer_[acc.id] += amount; break;
            case AccountKind::External: total_ -= amount; break;  // outflow
        }
    }

    Energy free_pool_ = 0;
    std::map<InstanceId, Energy> trapped_;
    std::map<InstanceId, Energy> buffer_;
    Energy total_ = 0;
};

}  // namespace enerstat
