#!/usr/bin/env python3
"""Regenerate the shipped seed-label files for the PI and form-type models.

Writes src/formnorms/data/seed_pi_labels.jsonl and seed_form_votes.jsonl.
Deterministic under the fixed seed; rerun after editing the cue vocabularies.
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from formnorms.form_extract import RawField, featurize_field  # noqa: E402

OUT_DIR = REPO / "src" / "formnorms" / "data"

# cue vocabularies per PI label: (label texts, names, placeholders, types, tags)
PI_VOCAB = {
    "Email Address": (
        ["Email", "Email Address", "Your Email", "E-mail", "Email address *",
         "Enter your email", "Work Email"],
        ["email", "user_email", "emailAddress", "contact_email", "email_address"],
        ["you@example.com", "name@domain.com", "Email address", "Enter email"],
        ["email", "text"], ["input"]),
    "Phone Number": (
        ["Phone", "Phone Number", "Mobile Number", "Telephone", "Cell Phone",
         "Contact number", "Mobile"],
        ["phone", "phone_number", "mobile", "tel", "phoneNumber", "mobile_phone"],
        ["(555) 555-5555", "+1 234 567 8900", "Phone number", "Mobile number"],
        ["tel", "text"], ["input"]),
    "Person Name": (
        ["First Name", "Last Name", "Full Name", "Name", "Your Name", "Surname",
         "Given name", "Family name"],
        ["first_name", "last_name", "fullname", "fname", "lname", "surname",
         "givenName", "name"],
        ["First name", "Last name", "Your full name", "Jane Doe"],
        ["text"], ["input"]),
    "Address": (
        ["Street Address", "Address", "Address Line 1", "Mailing Address",
         "Billing Address", "Shipping Address", "Home address"],
        ["address", "address1", "street", "addr_line1", "billing_address",
         "shipping_address", "streetAddress"],
        ["123 Main St", "Street address", "Address line 1"],
        ["text"], ["input", "textarea"]),
    "Coarse Location": (
        ["City", "State", "Country", "Province", "Region", "City / Town",
         "State or Province", "Country of residence"],
        ["city", "state", "country", "province", "region", "location_city"],
        ["City", "Select your country", "State"],
        ["text"], ["input", "select"]),
    "Postal Code": (
        ["Zip Code", "Postal Code", "ZIP", "Zip/Postal Code", "Postcode",
         "Billing ZIP"],
        ["zip", "zipcode", "postal_code", "postcode", "billingZip", "zip_code"],
        ["12345", "ZIP code", "Postal code"],
        ["text"], ["input"]),
    "Age": (
        ["Age", "Your Age", "Age Group", "Age Range", "How old are you?"],
        ["age", "age_group", "user_age", "ageRange"],
        ["Age", "18+", "Select age range"],
        ["number", "text"], ["input", "select"]),
    "Date of Birth": (
        ["Date of Birth", "DATE OF BIRTH", "Birthday", "Birth Date", "DOB",
         "Birthdate", "Date of birth (MM/DD/YYYY)"],
        ["dob", "date_of_birth", "birthdate", "birthday", "dateOfBirth", "birth_date"],
        ["MM/DD/YYYY", "DD/MM/YYYY", "YYYY-MM-DD", "Birth date"],
        ["date", "text"], ["input"]),
    "Bank Account Number": (
        ["Card Number", "Credit Card Number", "Account Number",
         "Bank Account Number", "Debit card number", "IBAN"],
        ["card_number", "cc_number", "account_number", "cardNumber", "iban",
         "credit_card"],
        ["1234 5678 9012 3456", "Card number", "Account number"],
        ["text"], ["input"]),
    "Government ID": (
        ["Passport Number", "Driver's License Number", "National ID",
         "Voter ID", "Government ID number", "License Number", "ID card number"],
        ["passport", "passport_number", "drivers_license", "national_id",
         "license_number", "governmentId"],
        ["Passport number", "License number", "National ID number"],
        ["text"], ["input"]),
    "Tax ID": (
        ["Social Security Number", "SSN", "Tax ID",
         "Taxpayer Identification Number", "ITIN", "Tax identification number",
         "SSN (last 4 digits)"],
        ["ssn", "tax_id", "taxid", "ssn_last4", "taxIdNumber", "social_security"],
        ["XXX-XX-XXXX", "SSN", "Tax ID"],
        ["text"], ["input"]),
    "Online Alias": (
        ["Username", "User Name", "Screen Name", "Handle", "Nickname",
         "Choose a username", "Display Name"],
        ["username", "user_name", "login", "nickname", "handle", "displayName",
         "screen_name"],
        ["Username", "Choose a username", "@handle"],
        ["text"], ["input"]),
    "Ethnicity": (
        ["Ethnicity", "Race", "Race/Ethnicity", "Ethnic Origin",
         "Race or ethnicity"],
        ["ethnicity", "race", "race_ethnicity", "ethnicOrigin"],
        ["Select ethnicity", "Race/ethnicity"],
        ["text"], ["select", "input"]),
    "Gender": (
        ["Gender", "Sex", "Select Gender", "Gender identity"],
        ["gender", "sex", "gender_identity"],
        ["Select gender", "Gender"],
        ["text"], ["select", "input"]),
    "Immigration Status": (
        ["Citizenship", "Nationality", "Citizenship Status",
         "Immigration Status", "Residency Status", "Are you a U.S. citizen?",
         "Country of citizenship", "Visa status"],
        ["citizenship", "nationality", "immigration_status", "visa_status",
         "residency"],
        ["Select citizenship status", "Nationality"],
        ["text"], ["select", "input"]),
    "Military Status": (
        ["Veteran Status", "Military Status", "Military Service",
         "Are you a veteran?", "Military/Veteran status"],
        ["veteran_status", "military_status", "veteran", "militaryService"],
        ["Select veteran status"],
        ["text"], ["select", "input"]),
    "Password": (
        ["Password", "Confirm Password", "Create password", "New password",
         "Re-enter password"],
        ["password", "pass", "confirm_password", "new_password", "password2"],
        ["Password", "Create a password", "At least 8 characters"],
        ["password"], ["input"]),
    "Business Info": (
        ["Company", "Company Name", "Organization", "Business Name",
         "Job Title", "Department", "Company website"],
        ["company", "organization", "company_name", "job_title", "department",
         "org_name"],
        ["Company name", "Organization", "Job title"],
        ["text"], ["input"]),
    "Fingerprints": (
        [None],
        ["csrf_token", "session_id", "tracking_id", "client_fingerprint",
         "captcha_token", "__viewstate", "gclid", "fbclid", "form_build_id"],
        [None],
        ["hidden"], ["input"]),
}

SAMPLES_PER_PI_LABEL = 28

# form-type keyword pools; samples mimic cleaned form text
FORM_VOCAB = {
    "Account Registration": [
        "create account", "sign up", "register", "join now", "new account",
        "choose a password", "confirm password", "create your profile",
        "already have an account", "agree to the terms"],
    "Account Login": [
        "log in", "sign in", "email or username", "password", "remember me",
        "keep me signed in", "forgot password", "login", "welcome back"],
    "Account Recovery": [
        "forgot your password", "reset password", "recover account",
        "we will send you a reset link", "enter the email associated with your account",
        "back to login", "send reset email", "verification code"],
    "Payment": [
        "payment", "card number", "expiration date", "cvv", "billing address",
        "pay now", "checkout", "order total", "billing zip", "donate",
        "payment method", "cardholder name"],
    "Financial Application": [
        "apply for a loan", "credit card application", "open an account",
        "annual income", "employment status", "loan amount", "apply now",
        "financial aid application", "insurance quote", "social security number"],
    "Role Application": [
        "job application", "apply for this position", "upload resume",
        "cover letter", "work experience", "school application", "admissions",
        "volunteer application", "position applied for", "references"],
    "Subscription": [
        "subscribe", "newsletter", "join our mailing list", "email updates",
        "sign up for our newsletter", "get the latest news", "unsubscribe anytime",
        "weekly digest", "subscribe now"],
    "Reservation": [
        "book now", "make a reservation", "reserve a table", "check in date",
        "check out date", "number of guests", "schedule an appointment",
        "select a time", "party size", "register for the event"],
    "Contact": [
        "contact us", "get in touch", "your message", "send message",
        "how can we help", "inquiry", "subject", "question or comment",
        "we will get back to you", "request a quote"],
    "Content Submission": [
        "write a review", "leave a comment", "your review", "rating",
        "post comment", "share your thoughts", "review title", "add a comment",
        "your rating", "comments are moderated"],
}

UNKNOWN_VOCAB = [
    "search", "search this site", "filter results", "sort by", "go",
    "cookie preferences", "accept all cookies", "language settings",
    "display settings", "save preferences", "manage cookies", "query",
]

COMMON_NOISE = ["submit", "required", "cancel", "please fill out", "field",
                "optional", "privacy", "next", "back", "email", "name"]

CONFUSABLE = {
    "Account Login": "Account Recovery",
    "Account Recovery": "Account Login",
    "Account Registration": "Account Login",
    "Contact": "Content Submission",
    "Content Submission": "Contact",
    "Payment": "Financial Application",
    "Financial Application": "Payment",
    "Subscription": "Account Registration",
    "Reservation": "Contact",
    "Role Application": "Financial Application",
}

SAMPLES_PER_FORM_TYPE = 22
UNKNOWN_SAMPLES = 12


def make_pi_labels(rng: random.Random) -> list[dict]:
    rows = []
    for label, (labels, names, placeholders, types, tags) in PI_VOCAB.items():
        for _ in range(SAMPLES_PER_PI_LABEL):
            attrs = {}
            name = rng.choice(names)
            attrs["name"] = name
            if rng.random() < 0.5:
                attrs["id"] = _camel(name) if rng.random() < 0.5 else name
            if rng.random() < 0.6:
                ph = rng.choice(placeholders)
                if ph:
                    attrs["placeholder"] = ph
            if rng.random() < 0.7:
                attrs["type"] = rng.choice(types)
            label_text = rng.choice(labels)
            field = RawField(rng.choice(tags), attrs, label_text,
                             "for_attr" if label_text else "none")
            rows.append({"feature_text": featurize_field(field), "pi_label": label})
    return rows


def _camel(name: str) -> str:
    parts = name.replace("-", "_").split("_")
    return parts[0] + "".join(p.title() for p in parts[1:])


def make_form_votes(rng: random.Random) -> list[dict]:
    rows = []
    for label, vocab in FORM_VOCAB.items():
        for i in range(SAMPLES_PER_FORM_TYPE):
            phrases = rng.sample(vocab, k=min(len(vocab), rng.randint(4, 6)))
            phrases += rng.sample(COMMON_NOISE, k=rng.randint(1, 3))
            rng.shuffle(phrases)
            text = " ".join(phrases)
            if i % 5 == 4:  # ambiguous sample: split votes with a confusable type
                other = CONFUSABLE[label]
                split = rng.choice([7, 8])
                votes = [label] * split + [other] * (10 - split)
            elif i % 7 == 6:  # noisy sample: a few Unknown votes
                votes = [label] * 8 + ["Unknown"] * 2
            else:
                votes = [label] * 10
            rng.shuffle(votes)
            rows.append({"feature_text": text, "votes": votes})
    for _ in range(UNKNOWN_SAMPLES):
        phrases = rng.sample(UNKNOWN_VOCAB, k=rng.randint(3, 5))
        rows.append({"feature_text": " ".join(phrases),
                     "votes": ["Unknown"] * 10})
    return rows


def write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    print(f"wrote {len(rows):4d} rows -> {path}")


def main() -> None:
    rng = random.Random(20240117)
    write_jsonl(OUT_DIR / "seed_pi_labels.jsonl", make_pi_labels(rng))
    write_jsonl(OUT_DIR / "seed_form_votes.jsonl", make_form_votes(rng))


if __name__ == "__main__":
    main()
